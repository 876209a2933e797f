"""Cross-covariances of the derivative process and the Markov transition model.

For one Matérn component the state is ``x_t = (z_t, z_t', ..., z_t^{(p)})``
with ``cov(x_u[i], x_v[j]) = (-1)^j k^{(i+j)}(u - v)``.  Conditioning
``x_u`` on ``x_v`` gives the transition matrix ``F = K_uv K_vv^{-1}`` and the
conditional covariance ``K_u|v = K_uu - F K_vu``.  The full model stacks a
cosine and a sine copy of every component's state.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np
from scipy import linalg

from .errors import ConditioningError, InputError, OrderingError
from .kernels import (
    KernelComponent,
    SpectralMaternKernel,
    derivative_stack,
)

logger = logging.getLogger(__name__)

__all__ = [
    "CrossCovMatrix",
    "ComponentTransition",
    "TransitionSensitivity",
    "AssembledModel",
    "cholesky_psd",
    "dgp_cross_cov",
    "component_transition",
    "transition_sensitivity",
    "measurement_vector",
    "assemble",
    "prior_covariance",
    "prior_covariance_dlogl",
]

JITTER_LEVELS = (0.0, 1e-12, 1e-10, 1e-8)


def cholesky_psd(M, *, return_method: bool = False):
    """Lower factor ``L`` with ``L @ L.T ~= M`` for a symmetric PSD matrix.

    Tries a plain Cholesky first, then adds ``eps * mean(diag(M))`` to the
    diagonal for ``eps`` in ``JITTER_LEVELS``.  If all of those fail the factor
    comes from a symmetric eigendecomposition with negative eigenvalues
    clamped to zero.

    Parameters
    ----------
    M : array_like
        Square symmetric matrix.
    return_method : bool
        Also return a string naming the path that produced the factor.

    Raises
    ------
    ConditioningError
        If ``M`` is not symmetric or is clearly indefinite.
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise InputError(f"expected a square matrix, got shape {M.shape}")
    scale = np.max(np.abs(M)) if M.size else 0.0
    if scale == 0.0:
        L = np.zeros_like(M)
        return (L, "zero") if return_method else L
    if not np.all(np.isfinite(M)):
        raise ConditioningError("matrix has non-finite entries")
    if np.max(np.abs(M - M.T)) > 1e-8 * scale:
        raise ConditioningError("matrix is not symmetric")
    M = 0.5 * (M + M.T)
    mean_diag = float(np.mean(np.diag(M)))
    for eps in JITTER_LEVELS:
        try:
            L = np.linalg.cholesky(M + eps * mean_diag * np.eye(M.shape[0]))
        except np.linalg.LinAlgError:
            continue
        method = "cholesky" if eps == 0.0 else f"cholesky+jitter({eps:g})"
        return (L, method) if return_method else L

    w, V = np.linalg.eigh(M)
    if w.min() < -1e-6 * max(w.max(), 0.0):
        raise ConditioningError(f"matrix is indefinite (min eigenvalue {w.min():.3e})")
    logger.debug("cholesky_psd: eigh fallback, min eigenvalue %.3e", w.min())
    # QR of the scaled eigenvectors gives a lower-triangular factor up to sign
    B = V * np.sqrt(np.clip(w, 0.0, None))
    _, R = np.linalg.qr(B.T)
    L = R.T
    return (L, "eigh") if return_method else L


def _hankel_signed(derivs: np.ndarray, n: int) -> np.ndarray:
    idx = np.add.outer(np.arange(n), np.arange(n))
    signs = (-1.0) ** np.arange(n)
    return derivs[idx] * signs[None, :]


def _cross_cov(tau: float, comp: KernelComponent) -> np.ndarray:
    return _hankel_signed(derivative_stack(tau, comp, 2 * comp.p), comp.p + 1)


def _cross_cov_dlogl(tau: float, comp: KernelComponent) -> np.ndarray:
    # d k^(m) / d log l = -m k^(m) - tau k^(m+1)
    derivs = derivative_stack(tau, comp, 2 * comp.p + 1)
    m = np.arange(2 * comp.p + 1)
    sens = -m * derivs[:-1] - float(tau) * derivs[1:]
    return _hankel_signed(sens, comp.p + 1)


@dataclass(frozen=True)
class CrossCovMatrix:
    """``cov(x_u, x_v)`` for the derivative process of one component."""

    entries: np.ndarray
    u: float
    v: float


def dgp_cross_cov(u: float, v: float, comp: KernelComponent) -> CrossCovMatrix:
    """Cross-covariance between the derivative-augmented states at ``u`` and ``v``."""
    return CrossCovMatrix(_cross_cov(float(u) - float(v), comp), float(u), float(v))


def prior_covariance(comp: KernelComponent) -> np.ndarray:
    """Stationary covariance ``K_{t,t}`` of one component's state."""
    return _cross_cov(0.0, comp)


def prior_covariance_dlogl(comp: KernelComponent) -> np.ndarray:
    """Derivative of :func:`prior_covariance` with respect to ``log l``."""
    return _cross_cov_dlogl(0.0, comp)


@dataclass(frozen=True)
class ComponentTransition:
    """Transition of one component's state from ``v`` to ``u = v + dt``."""

    F: np.ndarray
    K_cond: np.ndarray
    dt: float

    @cached_property
    def _factor(self):
        return cholesky_psd(self.K_cond, return_method=True)

    @property
    def L(self) -> np.ndarray:
        return self._factor[0]

    @property
    def factor_method(self) -> str:
        return self._factor[1]


@lru_cache(maxsize=512)
def _prior_factor(comp: KernelComponent) -> np.ndarray:
    L = cholesky_psd(prior_covariance(comp))
    if np.any(np.diag(L) <= 0):
        raise ConditioningError("K_vv is singular")
    L.setflags(write=False)
    return L


def _solve_kvv(comp: KernelComponent, B: np.ndarray) -> np.ndarray:
    """Solve ``K_vv X = B`` through the (jittered) Cholesky factor of ``K_vv``."""
    return linalg.cho_solve((_prior_factor(comp), True), B)


def component_transition(u: float, v: float, comp: KernelComponent) -> ComponentTransition:
    """Gaussian conditioning of ``x_u`` on ``x_v`` for one component."""
    dt = float(u) - float(v)
    if not dt > 0:
        raise OrderingError(f"transition requires u > v, got u={u}, v={v}")
    return _transition(dt, comp)


@lru_cache(maxsize=512)
def _transition(dt: float, comp: KernelComponent) -> ComponentTransition:
    K_vv = prior_covariance(comp)
    K_uv = _cross_cov(dt, comp)
    # F = K_uv K_vv^{-1}  <=>  K_vv F^T = K_vu = K_uv^T  (K_vv symmetric)
    F = _solve_kvv(comp, K_uv.T).T
    K_cond = K_vv - F @ K_uv.T
    K_cond = 0.5 * (K_cond + K_cond.T)
    F.setflags(write=False)
    K_cond.setflags(write=False)
    return ComponentTransition(F, K_cond, dt)


@dataclass(frozen=True)
class TransitionSensitivity:
    """Derivatives of ``F`` and ``K_u|v`` with respect to ``log k0`` and ``log l``."""

    dF_dlogk0: np.ndarray
    dK_dlogk0: np.ndarray
    dF_dlogl: np.ndarray
    dK_dlogl: np.ndarray


def transition_sensitivity(u: float, v: float, comp: KernelComponent) -> TransitionSensitivity:
    """Analytic derivatives of one component's transition quantities.

    ``F`` does not depend on ``k0`` and ``K_u|v`` is linear in it.  For the
    lengthscale, with ``A = K_uv`` and ``B = K_vv``::

        dF = (dA - F dB) B^{-1}
        dK = dB - dA F^T - F dA^T + F dB F^T

    (``K_uu = K_vv = B`` by stationarity.)
    """
    dt = float(u) - float(v)
    if not dt > 0:
        raise OrderingError(f"transition requires u > v, got u={u}, v={v}")
    tr = _transition(dt, comp)
    F, K_cond = tr.F, tr.K_cond

    dB = _cross_cov_dlogl(0.0, comp)
    dA = _cross_cov_dlogl(dt, comp)
    dF = _solve_kvv(comp, (dA - F @ dB).T).T
    dK = dB - dA @ F.T - F @ dA.T + F @ dB @ F.T
    dK = 0.5 * (dK + dK.T)
    return TransitionSensitivity(np.zeros_like(F), K_cond.copy(), dF, dK)


def measurement_vector(t: float, omegas, p: int) -> np.ndarray:
    """``H_t``: cosine and sine weights at the first slot of each state block."""
    omegas = np.asarray(omegas, dtype=float).reshape(-1)
    n = p + 1
    H = np.zeros(2 * n * omegas.size)
    H[0 :: 2 * n] = np.cos(omegas * t)
    H[n :: 2 * n] = np.sin(omegas * t)
    return H


def _duplicate_blocks(blocks) -> np.ndarray:
    return linalg.block_diag(*[b for blk in blocks for b in (blk, blk)])


@dataclass(frozen=True)
class AssembledModel:
    """Block-diagonal state-space model for one step ``t_prev -> t``.

    ``F`` and ``K_cond`` are ``None`` for the initial model (no ``t_prev``);
    ``K_prior`` always holds the stationary covariance.
    """

    t_prev: float | None
    t: float
    d: int
    F: np.ndarray | None
    K_cond: np.ndarray | None
    K_prior: np.ndarray
    H: np.ndarray
    transitions: tuple[ComponentTransition, ...] | None

    @cached_property
    def L(self) -> np.ndarray | None:
        if self.transitions is None:
            return None
        return _duplicate_blocks([tr.L for tr in self.transitions])

    @cached_property
    def L_prior(self) -> np.ndarray:
        return cholesky_psd(self.K_prior)


def assemble(t_prev: float | None, t: float, kern: SpectralMaternKernel) -> AssembledModel:
    """Assemble the stacked model of all components for the step ``t_prev -> t``."""
    t = float(t)
    if not np.isfinite(t):
        raise InputError("time must be finite")
    p = kern.p
    d = 2 * (p + 1) * kern.n_components
    K_prior = _duplicate_blocks([prior_covariance(c) for c in kern.components])
    H = measurement_vector(t, [c.omega for c in kern.components], p)
    if t_prev is None:
        return AssembledModel(None, t, d, None, None, K_prior, H, None)
    if not t > t_prev:
        raise OrderingError(f"times must be strictly increasing, got {t_prev} then {t}")
    trs = tuple(component_transition(t, t_prev, c) for c in kern.components)
    F = _duplicate_blocks([tr.F for tr in trs])
    K_cond = _duplicate_blocks([tr.K_cond for tr in trs])
    return AssembledModel(float(t_prev), t, d, F, K_cond, K_prior, H, trs)
