"""``dpcalib`` command line: fit, diagnose, dual, frontier, bounds, validate.

Exit codes: 0 success, 2 completed with a degraded status or failed check,
1 bad input or a hard numerical failure.
"""

import argparse
import csv
import io
import json
import sys
from dataclasses import replace

from . import __version__
from .bounds import marginal_bounds
from .exceptions import DPCalibError
from .mc import McConfig, histogram_moments, make_rng, mean_summary, sample_prior_predictive_K, \
    sample_rho_many, sample_w1, variance_summary
from .priors import GammaHyperprior
from .quadrature import DEFAULT_ORDER, build_rule, mixed_moments
from .refine import (DEFAULT_LAMBDA_GRID, DualAnchorConfig, KlOptions, chisq_doro_target,
                     doro_uniform_target, dual_anchor, kl_fit, pareto_frontier)
from .report import build_report, render_checklist, render_text
from .tsmm import NewtonOptions, cv, interval, resolve_target, stage1_result, tsmm_fit, vif
from .validation import check_positive, parse_grid, parse_interval
from .weights import diagnostics, rho_moments, w1_survival

EXIT_OK, EXIT_INPUT, EXIT_DEGRADED = 0, 1, 2
FRONTIER_HEADER = ("lambda", "a", "b", "mean_K", "var_K", "d1", "dominance")
MC_SE_LIMIT = 4.0


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _global_flags():
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--format", choices=("json", "text"), default="json")
    p.add_argument("--out", help="write output to this path instead of stdout")
    p.add_argument("--order", type=int, default=DEFAULT_ORDER, help="quadrature nodes")
    p.add_argument("--quiet", action="store_true", help="suppress warnings on stderr")
    return p


def _target_flags():
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--J", type=int, required=True)
    p.add_argument("--mu-k", type=float, required=True)
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--var-k", type=float)
    src.add_argument("--confidence", choices=("high", "medium", "low"))
    src.add_argument("--cv", type=float)
    src.add_argument("--interval", help="lo,hi,q")
    return p


def _hyper_flags():
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--J", type=int, required=True)
    p.add_argument("--a", type=float, required=True)
    p.add_argument("--b", type=float, required=True)
    return p


def _dual_flags():
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--t", type=float, default=0.5)
    p.add_argument("--delta", type=float, default=0.25)
    p.add_argument("--lambda", dest="lam", type=float, default=0.7)
    return p


def build_parser():
    parser = _Parser(prog="dpcalib", description="Calibrate Gamma hyperpriors for a DP concentration.")
    parser.add_argument("--version", action="version", version=f"dpcalib {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    g, t, h, d = _global_flags(), _target_flags(), _hyper_flags(), _dual_flags()

    fit = sub.add_parser("fit", parents=[g, t], help="calibrate (a, b) to elicited moments")
    fit.add_argument("--method", choices=("a1", "a2-mn", "a2-kl"), default="a2-mn")
    fit.add_argument("--kl-target", choices=("doro_uniform", "chisq_doro"), default="doro_uniform")

    sub.add_parser("diagnose", parents=[g, h], help="diagnostics for a given Gamma(a, b)")
    sub.add_parser("dual", parents=[g, t, d], help="TSMM followed by Dual-Anchor")

    fr = sub.add_parser("frontier", parents=[g, t, d], help="Dual-Anchor Pareto frontier as CSV")
    fr.add_argument("--grid", default="0.1:1.0:0.1")

    sub.add_parser("bounds", parents=[g, h], help="Poisson-proxy error bounds")

    va = sub.add_parser("validate", parents=[g, t], help="closed forms vs Monte Carlo")
    va.add_argument("--draws", type=int, default=100_000)
    va.add_argument("--seed", type=int, default=0)
    return parser


def _resolve(args):
    if args.var_k is not None:
        spec = args.var_k
    elif args.confidence is not None:
        spec = vif(args.confidence)
    elif args.cv is not None:
        spec = cv(args.cv)
    else:
        spec = interval(*parse_interval(args.interval))
    return resolve_target(args.J, args.mu_k, spec)


def _newton(args):
    return NewtonOptions(order=args.order)


def _emit(args, text):
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _warn(args, messages):
    if not args.quiet:
        for m in messages:
            print(f"warning: {m}", file=sys.stderr)


def _emit_report(args, report):
    if args.format == "json":
        _emit(args, report.to_json() + "\n")
    else:
        _emit(args, render_text(report) + "\n\n" + render_checklist(report) + "\n")
    _warn(args, report.diagnostics["warnings"])


def _emit_mapping(args, data):
    if args.format == "json":
        _emit(args, json.dumps(data, indent=2) + "\n")
    else:
        lines = []
        for k, v in data.items():
            lines.append(f"{k}: {v:.6g}" if isinstance(v, float) else f"{k}: {v}")
        _emit(args, "\n".join(lines) + "\n")


def _status_code(result):
    return EXIT_OK if result.status == "converged" else EXIT_DEGRADED


def cmd_fit(args):
    target = _resolve(args)
    if args.method == "a1":
        result = stage1_result(target, _newton(args))
        code = EXIT_OK
    elif args.method == "a2-kl":
        builder = doro_uniform_target if args.kl_target == "doro_uniform" else chisq_doro_target
        init = stage1_result(target, _newton(args)).hyper
        result = kl_fit(target.J, builder(target.J, target.mu_K), init, KlOptions(order=args.order))
        code = _status_code(result)
        # report against the elicited moments rather than the target pmf's own moments
        resid = max(abs(result.achieved.mean - target.mu_K),
                    abs(result.achieved.variance - target.var_K))
        result = replace(result, target=target, residual_inf_norm=resid)
    else:
        result = tsmm_fit(target, _newton(args))
        code = _status_code(result)
    diag = diagnostics(target.J, result.hyper, build_rule(result.hyper.a, args.order))
    _emit_report(args, build_report(result, diag))
    return code


def cmd_diagnose(args):
    hyper = GammaHyperprior(args.a, args.b)
    diag = diagnostics(args.J, hyper, build_rule(hyper.a, args.order))
    data = {"hyperprior": hyper.to_dict(), **diag.to_dict()}
    if args.format == "json":
        _emit(args, json.dumps(data, indent=2) + "\n")
    else:
        ks = diag.k_summary
        lines = [
            f"hyperprior: {hyper}",
            f"J: {args.J}",
            f"mean_K: {ks.mean:.6g}",
            f"var_K: {ks.variance:.6g}",
            f"median_K: {ks.median}",
            f"interval90_K: [{ks.quantiles['5']}, {ks.quantiles['95']}]",
        ]
        lines += [f"Pr(w1 > {s.threshold:g}): {s.probability:.6g}" for s in diag.w1_tails]
        lines += [f"rho_mean: {diag.rho_mean:.6g}", f"rho_var: {diag.rho_var:.6g}",
                  f"risk_level: {diag.risk_level}"]
        _emit(args, "\n".join(lines) + "\n")
    _warn(args, diag.warnings)
    return EXIT_OK


def _dual_config(args):
    return DualAnchorConfig(t=args.t, delta=args.delta, lam=args.lam, order=args.order)


def cmd_dual(args):
    target = _resolve(args)
    base = tsmm_fit(target, _newton(args))
    refined, tradeoff = dual_anchor(base, _dual_config(args))
    diag = diagnostics(target.J, refined.hyper, build_rule(refined.hyper.a, args.order))
    _emit_report(args, build_report(refined, diag, tradeoff))
    _warn(args, tradeoff.warnings)
    degraded = (not base.converged or tradeoff.constraint_status == "pareto_compromise"
                or refined.status in ("max_iter", "line_search_stall"))
    return EXIT_DEGRADED if degraded else EXIT_OK


def frontier_csv(points):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(FRONTIER_HEADER)
    for p in points:
        writer.writerow([repr(float(v)) for v in p.row()])
    return buf.getvalue()


def cmd_frontier(args):
    target = _resolve(args)
    grid = parse_grid(args.grid) if args.grid else list(DEFAULT_LAMBDA_GRID)
    base = tsmm_fit(target, _newton(args))
    points = pareto_frontier(target, _dual_config(args), grid, fit=base)
    _emit(args, frontier_csv(points))
    failed = [p for p in points if p.status.startswith("failed")]
    _warn(args, [f"lambda={p.lam:g}: {p.status}" for p in failed])
    return EXIT_DEGRADED if failed or not base.converged else EXIT_OK


def cmd_bounds(args):
    hyper = GammaHyperprior(args.a, args.b)
    rep = marginal_bounds(args.J, hyper, build_rule(hyper.a, args.order))
    _emit_mapping(args, rep.to_dict() if args.format == "json" else {
        k: v for k, v in rep.to_dict().items() if k != "hyperprior"} | {"hyperprior": str(hyper)})
    return EXIT_OK


def _check_row(name, reference, summary):
    z = summary.z_score(reference)
    return {"quantity": name, "closed_form": reference, "monte_carlo": summary.estimate,
            "std_error": summary.std_error, "z": z, "pass": bool(abs(z) <= MC_SE_LIMIT)}


def cmd_validate(args):
    target = _resolve(args)
    fit = tsmm_fit(target, _newton(args))
    hyper = fit.hyper
    check_positive(args.draws, "draws")
    cfg = McConfig(draws=args.draws, seed=args.seed)
    rule = build_rule(hyper.a, args.order)
    mom = mixed_moments(target.J, hyper, rule)
    k_mean, k_var = histogram_moments(
        sample_prior_predictive_K(target.J, hyper, cfg, make_rng(args.seed, 0)))
    w1 = sample_w1(hyper, make_rng(args.seed, 1), args.draws)
    rho = sample_rho_many(hyper, cfg, make_rng(args.seed, 2))
    rm = rho_moments(hyper, rule)
    rows = [
        _check_row("mean_K", mom.mean, k_mean),
        _check_row("var_K", mom.variance, k_var),
        _check_row("Pr(w1>0.5)", w1_survival(0.5, hyper).probability, mean_summary(w1 > 0.5)),
        _check_row("Pr(w1>0.9)", w1_survival(0.9, hyper).probability, mean_summary(w1 > 0.9)),
        _check_row("rho_mean", rm.mean, mean_summary(rho)),
        _check_row("rho_var", rm.variance, variance_summary(rho)),
    ]
    ok = all(r["pass"] for r in rows)
    if args.format == "json":
        _emit(args, json.dumps({"hyperprior": hyper.to_dict(), "draws": args.draws,
                                "seed": args.seed, "criterion_se": MC_SE_LIMIT,
                                "checks": rows, "all_pass": ok}, indent=2) + "\n")
    else:
        lines = [f"hyperprior: {hyper}  draws: {args.draws}  seed: {args.seed}",
                 f"{'quantity':<12}{'closed_form':>14}{'monte_carlo':>14}{'z':>8}  result"]
        for r in rows:
            lines.append(f"{r['quantity']:<12}{r['closed_form']:>14.6g}{r['monte_carlo']:>14.6g}"
                         f"{r['z']:>8.2f}  {'PASS' if r['pass'] else 'FAIL'}")
        _emit(args, "\n".join(lines) + "\n")
    return EXIT_OK if ok and fit.converged else EXIT_DEGRADED


COMMANDS = {"fit": cmd_fit, "diagnose": cmd_diagnose, "dual": cmd_dual,
            "frontier": cmd_frontier, "bounds": cmd_bounds, "validate": cmd_validate}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(parser.format_usage().rstrip(), file=sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (DPCalibError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
