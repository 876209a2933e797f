"""Exact Kalman recursions for the stacked spectral Matérn state-space model.

A :class:`FilterState` is immutable; :func:`update` returns a new state, and
:func:`forecast` never touches the state it is given.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace

import numpy as np

from .errors import ConditioningError, InputError, OrderingError
from .kernels import HyperParams
from .statespace import AssembledModel, assemble

logger = logging.getLogger(__name__)

__all__ = [
    "FilterState",
    "Predictive",
    "init_state",
    "predict_state",
    "update",
    "forecast",
    "filtered_latent",
    "local_loglik",
    "gaussian_logpdf",
]

LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass(frozen=True)
class Predictive:
    """Scalar Gaussian predictive distribution."""

    mean: float
    var: float
    kind: str = "observation"

    @property
    def std(self) -> float:
        return float(np.sqrt(self.var))


@dataclass(frozen=True)
class FilterState:
    """Posterior over the stacked state after the last processed observation."""

    m: np.ndarray
    P: np.ndarray
    theta: HyperParams
    p: int
    t_last: float | None = None
    k: int = 0
    initialized: bool = False

    @property
    def d(self) -> int:
        return self.m.size


def init_state(theta: HyperParams, p: int) -> FilterState:
    """Empty filter; the first observation is handled by the prior branch."""
    model = assemble(None, 0.0, theta.kernel(p))
    return FilterState(np.zeros(model.d), model.K_prior.copy(), theta, int(p))


def gaussian_logpdf(y: float, mean: float, var: float) -> float:
    if not var > 0:
        raise ConditioningError(f"predictive variance must be positive, got {var}")
    e = y - mean
    return -0.5 * LOG_2PI - 0.5 * np.log(var) - 0.5 * e * e / var


def _check_time(state: FilterState, t: float) -> float:
    t = float(t)
    if not np.isfinite(t):
        raise InputError("time must be finite")
    if state.initialized and not t > state.t_last:
        raise OrderingError(f"time {t} is not after the last update at {state.t_last}")
    return t


def _model(state: FilterState, t: float, theta: HyperParams) -> AssembledModel:
    t_prev = state.t_last if state.initialized else None
    return assemble(t_prev, t, theta.kernel(state.p))


def _propagate(state: FilterState, model: AssembledModel):
    if model.F is None:
        return np.zeros(model.d), model.K_prior.copy()
    m_minus = model.F @ state.m
    P_minus = model.F @ state.P @ model.F.T + model.K_cond
    return m_minus, 0.5 * (P_minus + P_minus.T)


def predict_state(state: FilterState, t: float, theta: HyperParams | None = None):
    """Prediction step: moments ``(m^-, P^-)`` of the state at time ``t``.

    An uninitialized state returns the stationary prior.  ``theta`` overrides
    the hyperparameters carried by ``state``.
    """
    t = _check_time(state, t)
    theta = state.theta if theta is None else theta
    return _propagate(state, _model(state, t, theta))


def _obs_moments(state, t, theta):
    model = _model(state, t, theta)
    m_minus, P_minus = _propagate(state, model)
    H = model.H
    mean = theta.trend_model().mean(t) + float(H @ m_minus)
    var = float(H @ P_minus @ H) + theta.sigma**2
    return model, m_minus, P_minus, mean, var


def forecast(state: FilterState, t: float) -> tuple[Predictive, Predictive]:
    """Observation and latent predictive at ``t``, given data up to ``t_last``.

    Returns
    -------
    (Predictive, Predictive)
        ``y_t`` predictive (variance ``v^-``) and ``z_t`` predictive
        (variance ``v^- - sigma^2``).
    """
    t = _check_time(state, t)
    theta = state.theta
    _, _, _, mean, var = _obs_moments(state, t, theta)
    latent_var = var - theta.sigma**2
    if latent_var < 0:
        logger.warning("latent variance %.3e < 0 from roundoff, clamped to 0", latent_var)
        latent_var = 0.0
    return (
        Predictive(mean, var, "observation"),
        Predictive(mean, latent_var, "latent_forecast"),
    )


def update(state: FilterState, t: float, y: float, theta: HyperParams | None = None):
    """Prediction then update step for the observation ``y`` at time ``t``.

    Returns
    -------
    (FilterState, Predictive)
        The posterior state and the one-step predictive of ``y`` made before
        the update (used for scoring).
    """
    y = float(y)
    if not np.isfinite(y):
        raise InputError(f"observation must be finite, got {y}")
    t = _check_time(state, t)
    theta = state.theta if theta is None else theta
    model, m_minus, P_minus, mean, v_minus = _obs_moments(state, t, theta)
    if not v_minus > 0:
        raise ConditioningError(f"non-positive predictive variance {v_minus}")
    H = model.H
    e = y - mean
    G = P_minus @ H / v_minus
    m = m_minus + e * G
    P = P_minus - v_minus * np.outer(G, G)
    P = 0.5 * (P + P.T)
    new = replace(state, m=m, P=P, theta=theta, t_last=t, k=state.k + 1, initialized=True)
    return new, Predictive(mean, v_minus, "observation")


def filtered_latent(state: FilterState) -> Predictive:
    """``z_t | y_{t_0:t}`` at the time of the last update."""
    if not state.initialized:
        raise InputError("filter has not processed any observation")
    t = state.t_last
    H = assemble(None, t, state.theta.kernel(state.p)).H
    mean = state.theta.trend_model().mean(t) + float(H @ state.m)
    var = max(float(H @ state.P @ H), 0.0)
    return Predictive(mean, var, "latent_filtered")


def local_loglik(state: FilterState, t: float, y: float, theta: HyperParams | None = None) -> float:
    """Log density of ``y`` at ``t`` given the past, under ``theta``.

    The carried posterior ``(m, P)`` is held fixed; only the transition,
    measurement vector, trend and noise are rebuilt from ``theta``.
    """
    y = float(y)
    if not np.isfinite(y):
        raise InputError(f"observation must be finite, got {y}")
    t = _check_time(state, t)
    theta = state.theta if theta is None else theta
    _, _, _, mean, var = _obs_moments(state, t, theta)
    return float(gaussian_logpdf(y, mean, var))
