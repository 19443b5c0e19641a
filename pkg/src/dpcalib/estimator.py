"""scikit-learn style wrappers around the calibration routines.

The "training data" of a calibrator is an elicitation target, not a design
matrix: ``fit`` takes an :class:`~dpcalib.tsmm.ElicitationTarget` (or a
``(J, mu_K, var_K)`` triple) and ``predict`` maps design sizes to the
prior-predictive mean of K_J under the fitted hyperprior.
"""

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .quadrature import DEFAULT_ORDER, marginal_pmf, mixed_moments
from .refine import DualAnchorConfig, KlOptions, chisq_doro_target, doro_uniform_target, dual_anchor, kl_fit
from .tsmm import NewtonOptions, stage1_init, tsmm_fit
from .validation import check_design_size, check_target
from .weights import diagnostics


class _CalibratorMixin:

    def _set_fitted(self, result):
        self.result_ = result
        self.hyper_ = result.hyper
        self.a_ = result.hyper.a
        self.b_ = result.hyper.b
        self.n_iter_ = result.iterations
        self.status_ = result.status
        return self

    def predict(self, J):
        """Prior-predictive ``E[K_J]`` for each design size in ``J``."""
        check_is_fitted(self, "hyper_")
        sizes = np.atleast_1d(J)
        out = np.array([mixed_moments(check_design_size(int(j)), self.hyper_).mean for j in sizes])
        return out if np.ndim(J) else float(out[0])

    def predict_proba(self, J):
        """Marginal pmf of ``K_J`` on ``1..J``."""
        check_is_fitted(self, "hyper_")
        return marginal_pmf(check_design_size(J), self.hyper_)

    def diagnose(self, J=None):
        check_is_fitted(self, "hyper_")
        return diagnostics(J or self.result_.target.J, self.hyper_)


class TSMMCalibrator(_CalibratorMixin, BaseEstimator):
    """Stage-1 closed form followed by exact-moment Newton refinement."""

    def __init__(self, order=DEFAULT_ORDER, tol=1e-8, max_iter=20, scaling="log_J"):
        self.order = order
        self.tol = tol
        self.max_iter = max_iter
        self.scaling = scaling

    def _options(self):
        return NewtonOptions(order=self.order, tol_F=self.tol, max_iter=self.max_iter,
                             scaling=self.scaling)

    def fit(self, target, y=None):
        target = check_target(target)
        return self._set_fitted(tsmm_fit(target, self._options()))


class DualAnchorCalibrator(TSMMCalibrator):
    """TSMM followed by the dominance-penalized Dual-Anchor refit."""

    def __init__(self, order=DEFAULT_ORDER, tol=1e-8, max_iter=20, scaling="log_J",
                 t=0.5, delta=0.25, lam=0.7):
        super().__init__(order=order, tol=tol, max_iter=max_iter, scaling=scaling)
        self.t = t
        self.delta = delta
        self.lam = lam

    def fit(self, target, y=None):
        target = check_target(target)
        base = tsmm_fit(target, self._options())
        config = DualAnchorConfig(t=self.t, delta=self.delta, lam=self.lam, order=self.order)
        refined, self.tradeoff_ = dual_anchor(base, config)
        self.tsmm_result_ = base
        return self._set_fitted(refined)


class KLCalibrator(_CalibratorMixin, BaseEstimator):
    """Fit the whole K_J pmf to a DORO-Uniform or chi-squared DORO target."""

    def __init__(self, target_shape="doro_uniform", order=DEFAULT_ORDER):
        self.target_shape = target_shape
        self.order = order

    def fit(self, target, y=None):
        target = check_target(target)
        builders = {"doro_uniform": doro_uniform_target, "chisq_doro": chisq_doro_target}
        if self.target_shape not in builders:
            raise ValueError(f"target_shape must be one of {sorted(builders)}")
        pmf = builders[self.target_shape](target.J, target.mu_K)
        init = stage1_init(target)
        self.target_pmf_ = pmf
        return self._set_fitted(kl_fit(target.J, pmf, init, KlOptions(order=self.order)))


__all__ = ["TSMMCalibrator", "DualAnchorCalibrator", "KLCalibrator"]
