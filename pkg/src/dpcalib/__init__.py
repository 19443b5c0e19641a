"""Design-conditional calibration of Gamma hyperpriors for a Dirichlet-process
concentration parameter, with weight-dominance diagnostics."""

__version__ = "0.1.0"

from .exceptions import (CalibrationError, ConvergenceError, DomainError, DPCalibError,
                         InfeasibleTargetError)
from .priors import GammaHyperprior
from .exact import antoniak_pmf, conditional_moments, log_stirling_table
from .quadrature import build_rule, marginal_pmf, mixed_moments, moment_jacobian
from .tsmm import (CalibrationResult, ElicitationTarget, NewtonOptions, cv, feasibility_check,
                   interval, resolve_target, stage1_init, tsmm_fit, vif)
from .weights import classify_risk, diagnostics, rho_moments, w1_mean, w1_survival
from .refine import (DualAnchorConfig, chisq_doro_target, doro_uniform_target, dual_anchor,
                     kl_fit, pareto_frontier)
from .bounds import conditional_bounds, marginal_bounds, stage1_guidance


def __getattr__(name):
    # the estimator wrappers pull in scikit-learn, so load them on first use
    if name in ("TSMMCalibrator", "DualAnchorCalibrator", "KLCalibrator"):
        from . import estimator
        return getattr(estimator, name)
    raise AttributeError(f"module 'dpcalib' has no attribute {name!r}")


__all__ = [
    "__version__", "DPCalibError", "DomainError", "InfeasibleTargetError", "ConvergenceError",
    "CalibrationError", "GammaHyperprior", "antoniak_pmf", "conditional_moments",
    "log_stirling_table", "build_rule", "marginal_pmf", "mixed_moments", "moment_jacobian",
    "CalibrationResult", "ElicitationTarget", "NewtonOptions", "resolve_target",
    "feasibility_check", "stage1_init", "tsmm_fit", "vif", "cv", "interval", "w1_survival",
    "w1_mean", "rho_moments", "classify_risk", "diagnostics", "DualAnchorConfig", "dual_anchor",
    "pareto_frontier", "doro_uniform_target", "chisq_doro_target", "kl_fit",
    "conditional_bounds", "marginal_bounds", "stage1_guidance", "TSMMCalibrator",
    "DualAnchorCalibrator", "KLCalibrator",
]
