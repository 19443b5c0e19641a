import pytest

from dpcalib import GammaHyperprior, resolve_target, tsmm_fit, vif


@pytest.fixture(scope="session")
def worked_target():
    return resolve_target(50, 5.0, vif("medium"))


@pytest.fixture(scope="session")
def worked_fit(worked_target):
    return tsmm_fit(worked_target)


@pytest.fixture
def vague():
    return GammaHyperprior(1.0, 1.0)


ACCEPTANCE_KEY = pytest.StashKey[list]()


@pytest.fixture
def criterion(request):
    """Record one acceptance line; the summary prints them in criterion order."""
    lines = request.config.stash.setdefault(ACCEPTANCE_KEY, [])

    def record(number, title, checks):
        ok = all(passed for _, passed in checks)
        failed = [name for name, passed in checks if not passed]
        detail = "" if ok else f"  [failed: {'; '.join(failed)}]"
        lines.append((number, f"criterion {number:>2} {'PASS' if ok else 'FAIL'}  {title}{detail}"))
        return ok

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
