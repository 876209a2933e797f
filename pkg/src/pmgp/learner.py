"""Online passive-aggressive learning of the hyperparameters.

At every observation the local utility is the one-step log density
``L(theta) = log N(y_t; mbar(theta), vbar(theta))``.  Its gradient is taken
with the carried filter posterior held fixed, and ``theta`` moves along it by
the closed-form solution of the linearised PA-II problem.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import ConditioningError, InputError
from .filter import (
    FilterState,
    Predictive,
    _check_time,
    _model,
    _propagate,
    forecast,
    gaussian_logpdf,
    init_state,
    update,
)
from .kernels import HyperParams, trend_size
from .statespace import prior_covariance, prior_covariance_dlogl, transition_sensitivity

logger = logging.getLogger(__name__)

__all__ = [
    "PAConfig",
    "GradientBundle",
    "StepRecord",
    "grad_local_loglik",
    "aggressiveness",
    "pa_update",
    "initial_theta",
    "step",
    "OnlineForecaster",
]


@dataclass(frozen=True)
class PAConfig:
    """Normalised aggressiveness ``c``, tolerance ``eps`` and the norm floor."""

    c: float = 100.0
    eps: float = 0.0
    theta_norm_floor: float = 1.0

    def __post_init__(self):
        if not (np.isfinite(self.c) and self.c > 0):
            raise InputError(f"c must be > 0, got {self.c}")
        if not self.eps >= 0:
            raise InputError(f"eps must be >= 0, got {self.eps}")
        if not self.theta_norm_floor > 0:
            raise InputError("theta_norm_floor must be > 0")


@dataclass(frozen=True)
class GradientBundle:
    """Local log-likelihood, its predictive moments and their gradients."""

    value: float
    mean: float
    var: float
    dmean: np.ndarray
    dvar: np.ndarray
    grad: np.ndarray


@dataclass(frozen=True)
class StepRecord:
    t: float
    theta: np.ndarray
    loglik: float
    updated: bool


def grad_local_loglik(
    state: FilterState, t: float, y: float, theta: HyperParams | None = None
) -> GradientBundle:
    """Analytic gradient of the local log-likelihood in flat-theta coordinates."""
    y = float(y)
    if not np.isfinite(y):
        raise InputError(f"observation must be finite, got {y}")
    t = _check_time(state, t)
    theta = state.theta if theta is None else theta
    p = state.p
    nb = p + 1
    model = _model(state, t, theta)
    m_minus, P_minus = _propagate(state, model)
    H = model.H
    trend = theta.trend_model()
    sigma2 = theta.sigma**2
    mean = trend.mean(t) + float(H @ m_minus)
    var = float(H @ P_minus @ H) + sigma2

    size = theta.size
    dm = np.zeros(size)
    dv = np.zeros(size)
    dm[theta.index_beta()] = trend.basis(t)
    dv[theta.index_log_sigma()] = 2.0 * sigma2

    if state.initialized:
        PFH = state.P @ (model.F.T @ H)
    comps = theta.kernel(p).components
    omegas = theta.omega
    for i, comp in enumerate(comps):
        i_k0, i_l, i_w = theta.index_component(i)
        blocks = (slice(2 * i * nb, (2 * i + 1) * nb), slice((2 * i + 1) * nb, (2 * i + 2) * nb))
        if state.initialized:
            sens = transition_sensitivity(t, state.t_last, comp)
            for dF, dK, idx in (
                (sens.dF_dlogk0, sens.dK_dlogk0, i_k0),
                (sens.dF_dlogl, sens.dK_dlogl, i_l),
            ):
                for b in blocks:
                    Hb = H[b]
                    dm[idx] += Hb @ dF @ state.m[b]
                    dv[idx] += Hb @ dK @ Hb + 2.0 * (Hb @ dF @ PFH[b])
        else:
            dK0 = prior_covariance(comp)
            dKl = prior_covariance_dlogl(comp)
            for b in blocks:
                Hb = H[b]
                dv[i_k0] += Hb @ dK0 @ Hb
                dv[i_l] += Hb @ dKl @ Hb

        w = omegas[i]
        dH = np.zeros_like(H)
        dH[blocks[0].start] = -t * w * np.sin(w * t)
        dH[blocks[1].start] = t * w * np.cos(w * t)
        dm[i_w] = dH @ m_minus
        dv[i_w] = 2.0 * (dH @ P_minus @ H)

    e = y - mean
    grad = (-0.5 / var + 0.5 * e * e / var**2) * dv + (e / var) * dm
    value = float(gaussian_logpdf(y, mean, var))
    return GradientBundle(value, mean, var, dm, dv, grad)


def aggressiveness(c: float, theta_vec, loglik: float, eps: float, floor: float = 1.0) -> float:
    """``c_k = c * max(|theta|^2, floor) / (eps + L)^2``."""
    norm2 = float(np.dot(theta_vec, theta_vec))
    return c * max(norm2, floor) / (eps + loglik) ** 2


def pa_update(
    theta_prev: HyperParams,
    loglik: float,
    grad,
    cfg: PAConfig,
    *,
    c_k: float | None = None,
) -> HyperParams:
    """Closed-form passive-aggressive step on the flat hyperparameter vector.

    Parameters
    ----------
    theta_prev : HyperParams
        Current hyperparameters.
    loglik : float
        Local log-likelihood at ``theta_prev``.
    grad : array_like
        Its gradient in flat coordinates.
    cfg : PAConfig
        ``c``, ``eps`` and the norm floor.
    c_k : float, optional
        Use this aggressiveness instead of the normalised one.

    Returns
    -------
    HyperParams
        ``theta_prev`` itself when passive (``loglik >= -eps``) or when the
        step would be non-finite.
    """
    grad = np.asarray(grad, dtype=float)
    if not np.isfinite(loglik) or not np.all(np.isfinite(grad)):
        raise InputError("loglik and gradient must be finite")
    if grad.size != theta_prev.size:
        raise InputError(f"gradient has length {grad.size}, expected {theta_prev.size}")
    loss = -cfg.eps - loglik
    if loss <= 0:
        return theta_prev
    vec = theta_prev.pack()
    if c_k is None:
        c_k = aggressiveness(cfg.c, vec, loglik, cfg.eps, cfg.theta_norm_floor)
    new = vec + c_k * loss / (1.0 + c_k * float(grad @ grad)) * grad
    if not np.all(np.isfinite(new)):
        logger.warning("PA update produced a non-finite theta; keeping previous value")
        return theta_prev
    return theta_prev.with_vector(new)


def initial_theta(n_components: int, fs: float, trend: str = "linear") -> HyperParams:
    """Zero log-parameters with frequencies ``omega_i = (1 + i) / K * pi * fs``."""
    if n_components < 1:
        raise InputError("need at least one component")
    if not (np.isfinite(fs) and fs > 0):
        raise InputError(f"sampling frequency must be > 0, got {fs}")
    i = np.arange(n_components)
    omega = (1.0 + i) / n_components * np.pi * fs
    zeros = np.zeros(n_components)
    return HyperParams(np.zeros(trend_size(trend)), 0.0, zeros, zeros.copy(), np.log(omega), trend)


def step(state: FilterState, t: float, y: float, cfg: PAConfig):
    """One iteration of online forecasting with hyperparameter learning.

    The hyperparameters are first moved by :func:`pa_update` using the
    incoming observation, then the prediction and update steps run under the
    new values.

    Returns
    -------
    (FilterState, Predictive, StepRecord)
        The returned predictive is the pre-update one under the new
        hyperparameters.
    """
    bundle = grad_local_loglik(state, t, y)
    theta_new = pa_update(state.theta, bundle.value, bundle.grad, cfg)
    updated = theta_new is not state.theta
    try:
        new_state, pred = update(state, t, y, theta_new)
    except ConditioningError:
        if not updated:
            raise
        logger.warning("update failed under new theta at t=%s; keeping previous theta", t)
        theta_new, updated = state.theta, False
        new_state, pred = update(state, t, y, theta_new)
    return new_state, pred, StepRecord(float(t), theta_new.pack(), bundle.value, updated)


class OnlineForecaster:
    """Streaming forecaster: call :meth:`forecast` then :meth:`observe`.

    Holds only the current filter state, so memory does not grow with the
    number of observations.
    """

    def __init__(self, theta: HyperParams, p: int, cfg: PAConfig | None = None, learn: bool = True):
        self.state = init_state(theta, p)
        self.cfg = cfg or PAConfig()
        self.learn = learn
        self.n_updates = 0

    @property
    def theta(self) -> HyperParams:
        return self.state.theta

    def forecast(self, t: float) -> Predictive:
        return forecast(self.state, t)[0]

    def observe(self, t: float, y: float):
        if self.learn:
            self.state, pred, rec = step(self.state, t, y, self.cfg)
        else:
            self.state, pred = update(self.state, t, y)
            rec = StepRecord(float(t), self.state.theta.pack(), float("nan"), False)
        self.n_updates += rec.updated
        return pred, rec
