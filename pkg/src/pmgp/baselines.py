"""Fully-online autoregressive baselines and the NMAE metric.

The AR regressors use the last ``k`` raw observations (most recent first) as
features.  Weights start at zero.  PA, PA-I and PA-II use the
epsilon-insensitive hinge loss; BLR is the conjugate Gaussian update with a
standard normal prior on the weights.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateSeriesError, DimensionError, InputError

logger = logging.getLogger(__name__)

__all__ = [
    "ARModel",
    "NMAEResult",
    "ar_features",
    "pa_step_size",
    "pa_regress_update",
    "blr_update",
    "blr_predict",
    "ar_predict",
    "nmae",
]

PA_VARIANTS = ("PA", "PA-I", "PA-II")
VARIANTS = PA_VARIANTS + ("BLR",)


@dataclass
class ARModel:
    """Online AR(k) regressor.

    ``C`` and ``eps_ins`` apply to the PA variants, ``noise_std`` and ``cov``
    to BLR (``weights`` doubles as the BLR posterior mean).
    """

    order: int
    variant: str = "PA"
    C: float = 100.0
    eps_ins: float = 0.0
    noise_std: float = 1.0
    weights: np.ndarray = field(default=None)
    cov: np.ndarray | None = field(default=None)

    def __post_init__(self):
        if self.order < 1:
            raise InputError("AR order must be >= 1")
        if self.variant not in VARIANTS:
            raise InputError(f"unknown variant {self.variant!r}, expected one of {VARIANTS}")
        if self.weights is None:
            self.weights = np.zeros(self.order)
        self.weights = np.asarray(self.weights, dtype=float)
        if self.weights.size != self.order:
            raise DimensionError("weights length must equal the AR order")
        if self.variant == "BLR":
            if not self.noise_std > 0:
                raise InputError("BLR noise_std must be > 0")
            if self.cov is None:
                self.cov = np.eye(self.order)


def ar_features(history, order: int) -> np.ndarray:
    """Last ``order`` values of ``history``, most recent first, zero-padded."""
    x = np.zeros(order)
    recent = np.asarray(history, dtype=float)[::-1][:order]
    x[: recent.size] = recent
    return x


def ar_predict(model: ARModel, x) -> float:
    return float(model.weights @ np.asarray(x, dtype=float))


def pa_step_size(loss: float, sq_norm: float, variant: str, C: float) -> float:
    if loss <= 0:
        return 0.0
    if variant == "PA":
        return loss / sq_norm
    if variant == "PA-I":
        return min(C, loss / sq_norm)
    if variant == "PA-II":
        return loss / (sq_norm + 1.0 / (2.0 * C))
    raise InputError(f"{variant!r} is not a PA variant")


def pa_regress_update(model: ARModel, x, y: float) -> ARModel:
    """Passive-aggressive regression step; updates ``model`` in place and returns it."""
    if model.variant not in PA_VARIANTS:
        raise InputError(f"{model.variant} model passed to pa_regress_update")
    x = np.asarray(x, dtype=float)
    resid = float(y) - float(model.weights @ x)
    loss = max(abs(resid) - model.eps_ins, 0.0)
    if loss == 0.0:
        return model
    sq_norm = float(x @ x)
    if sq_norm == 0.0 and model.variant != "PA-II":
        logger.warning("zero feature vector with positive loss; skipping %s update", model.variant)
        return model
    tau = pa_step_size(loss, sq_norm, model.variant, model.C)
    model.weights = model.weights + np.sign(resid) * tau * x
    return model


def blr_update(model: ARModel, x, y: float) -> ARModel:
    """Rank-one conjugate update of the BLR posterior; in place, returns ``model``."""
    if model.variant != "BLR":
        raise InputError(f"{model.variant} model passed to blr_update")
    x = np.asarray(x, dtype=float)
    Sx = model.cov @ x
    denom = model.noise_std**2 + float(x @ Sx)
    gain = Sx / denom
    model.weights = model.weights + gain * (float(y) - float(model.weights @ x))
    cov = model.cov - np.outer(gain, Sx)
    model.cov = 0.5 * (cov + cov.T)
    return model


def blr_predict(model: ARModel, x) -> float:
    return ar_predict(model, x)


@dataclass(frozen=True)
class NMAEResult:
    nmae: float
    std: float
    running: np.ndarray
    errors: np.ndarray


def nmae(predictions, actuals) -> NMAEResult:
    """Mean absolute error normalised by the std of the series' increments.

    The first forecast is excluded.  The increment std uses the population
    convention (``ddof=0``).  ``running`` is the cumulative mean of the
    normalised absolute errors and ``errors`` the errors themselves.
    """
    pred = np.asarray(predictions, dtype=float).reshape(-1)
    act = np.asarray(actuals, dtype=float).reshape(-1)
    if pred.size != act.size:
        raise DimensionError(f"{pred.size} predictions vs {act.size} actuals")
    if act.size < 2:
        raise InputError("need at least two points")
    scale = float(np.std(np.diff(act)))
    if scale == 0.0:
        raise DegenerateSeriesError("increments have zero standard deviation")
    err = np.abs(act[1:] - pred[1:]) / scale
    running = np.cumsum(err) / np.arange(1, err.size + 1)
    return NMAEResult(float(err.mean()), float(err.std()), running, err)
