"""Dense O(N^3) Gaussian process regression, the ground truth for the filter."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .errors import DimensionError, InputError, OrderingError
from .filter import LOG_2PI, Predictive
from .kernels import SpectralMaternKernel, TrendModel
from .statespace import cholesky_psd

__all__ = ["GPRProblem", "log_marginal_likelihood", "posterior"]


@dataclass(frozen=True)
class GPRProblem:
    times: np.ndarray
    observations: np.ndarray
    kern: SpectralMaternKernel
    trend: TrendModel
    sigma: float

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float).reshape(-1)
        y = np.asarray(self.observations, dtype=float).reshape(-1)
        if t.size != y.size:
            raise DimensionError(f"{t.size} times but {y.size} observations")
        if np.any(np.diff(t) <= 0):
            raise OrderingError("times must be strictly increasing")
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(y))):
            raise InputError("times and observations must be finite")
        if not self.sigma > 0:
            raise InputError("sigma must be > 0")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "observations", y)

    def gram(self) -> np.ndarray:
        tau = self.times[:, None] - self.times[None, :]
        return np.asarray(self.kern(tau))

    def trend_mean(self, times) -> np.ndarray:
        return np.array([self.trend.mean(t) for t in np.atleast_1d(times)])


def _factor(prob: GPRProblem):
    C = prob.gram() + prob.sigma**2 * np.eye(prob.times.size)
    return cholesky_psd(C)


def log_marginal_likelihood(prob: GPRProblem) -> float:
    """``log N(y; m(t), K + sigma^2 I)``."""
    if prob.times.size == 0:
        raise InputError("need at least one observation")
    L = _factor(prob)
    r = prob.observations - prob.trend_mean(prob.times)
    alpha = linalg.solve_triangular(L, r, lower=True)
    n = r.size
    return float(-0.5 * alpha @ alpha - np.sum(np.log(np.diag(L))) - 0.5 * n * LOG_2PI)


def posterior(prob: GPRProblem, t_star: float) -> Predictive:
    """Posterior of the latent value ``z`` at ``t_star``."""
    t_star = float(t_star)
    prior_mean = prob.trend.mean(t_star)
    prior_var = prob.kern.variance
    if prob.times.size == 0:
        return Predictive(prior_mean, prior_var, "latent_forecast")
    L = _factor(prob)
    k_star = np.asarray(prob.kern(t_star - prob.times))
    r = prob.observations - prob.trend_mean(prob.times)
    a = linalg.solve_triangular(L, r, lower=True)
    b = linalg.solve_triangular(L, k_star, lower=True)
    mean = prior_mean + float(b @ a)
    var = max(prior_var - float(b @ b), 0.0)
    return Predictive(mean, var, "latent_forecast")
