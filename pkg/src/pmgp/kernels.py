"""Half-integer Matérn kernels, the spectral Matérn mixture and hyperparameters.

For smoothness ``p`` (``nu = p + 1/2``) the Matérn kernel has the closed form

    k(tau) = k0 * exp(-x) * q(x),    x = lam * |tau|,    lam = sqrt(2p + 1) / l

with ``q`` a degree-``p`` polynomial.  Derivatives in ``tau`` follow from the
recurrence ``d/dx [exp(-x) q(x)] = exp(-x) (q'(x) - q(x))``, so every
derivative up to order ``2p`` is again an exponential times a polynomial.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from math import factorial

import numpy as np

from .errors import DimensionError, DomainError, InputError, UnsupportedOrderError

__all__ = [
    "KernelComponent",
    "SpectralMaternKernel",
    "TrendModel",
    "HyperParams",
    "matern_eval",
    "matern_derivative",
    "matern_derivative_dlogl",
    "spectral_matern_eval",
    "derivative_stack",
]

TREND_KINDS = ("constant", "linear")


@lru_cache(maxsize=None)
def _poly(p: int, m: int) -> np.ndarray:
    """Coefficients (increasing powers of x) of q_m for smoothness p.

    ``q_0`` is the half-integer Matérn polynomial and ``q_{m+1} = q_m' - q_m``.
    """
    if m == 0:
        scale = factorial(p) / factorial(2 * p)
        coef = [
            scale * factorial(2 * p - j) / (factorial(j) * factorial(p - j)) * 2.0**j
            for j in range(p + 1)
        ]
        out = np.array(coef, dtype=float)
    else:
        prev = _poly(p, m - 1)
        deriv = np.zeros_like(prev)
        deriv[:-1] = prev[1:] * np.arange(1, prev.size)
        out = deriv - prev
    out.setflags(write=False)
    return out


def _raw_derivative(tau, m: int, k0: float, l: float, p: int):
    """m-th tau-derivative from the one-sided closed form, no order check."""
    tau = np.asarray(tau, dtype=float)
    lam = np.sqrt(2 * p + 1) / l
    x = lam * np.abs(tau)
    val = k0 * lam**m * np.exp(-x) * np.polynomial.polynomial.polyval(x, _poly(p, m))
    if m % 2:
        val = np.where(tau < 0, -val, val)
    return val


@lru_cache(maxsize=None)
def _poly_matrix(p: int, upto: int) -> np.ndarray:
    """Rows ``q_0 .. q_upto`` stacked, each padded to ``p + 1`` coefficients."""
    out = np.zeros((upto + 1, p + 1))
    for m in range(upto + 1):
        out[m] = _poly(p, m)
    out.setflags(write=False)
    return out


def derivative_stack(tau: float, comp: "KernelComponent", upto: int) -> np.ndarray:
    """``k^{(m)}(tau)`` for ``m = 0 .. upto`` at a single finite lag.

    Orders above ``2p`` come from the one-sided closed form.  Odd orders are
    exactly zero at ``tau == 0``.
    """
    tau = float(tau)
    if not np.isfinite(tau):
        raise DomainError("lag must be finite")
    p = comp.p
    lam = comp.lam
    x = lam * abs(tau)
    q = _poly_matrix(p, upto) @ (x ** np.arange(p + 1))
    vals = comp.k0 * np.exp(-x) * q * lam ** np.arange(upto + 1)
    if tau < 0:
        vals[1::2] *= -1.0
    elif tau == 0:
        vals[1::2] = 0.0
    return vals


@dataclass(frozen=True)
class KernelComponent:
    """One Matérn-(p+1/2) component, modulated by ``cos(omega * tau)``."""

    k0: float
    l: float
    omega: float = 0.0
    p: int = 0

    def __post_init__(self):
        if not (np.isfinite(self.k0) and self.k0 > 0):
            raise DomainError(f"k0 must be finite and > 0, got {self.k0}")
        if not (np.isfinite(self.l) and self.l > 0):
            raise DomainError(f"l must be finite and > 0, got {self.l}")
        if not (np.isfinite(self.omega) and self.omega >= 0):
            raise DomainError(f"omega must be finite and >= 0, got {self.omega}")
        if int(self.p) != self.p or self.p < 0:
            raise DomainError(f"p must be a non-negative integer, got {self.p}")
        object.__setattr__(self, "p", int(self.p))

    @property
    def lam(self) -> float:
        return float(np.sqrt(2 * self.p + 1) / self.l)


@dataclass(frozen=True)
class SpectralMaternKernel:
    """Sum of cosine-modulated Matérn components sharing one smoothness."""

    components: tuple[KernelComponent, ...]

    def __post_init__(self):
        comps = tuple(self.components)
        if not comps:
            raise DomainError("a spectral Matérn kernel needs at least one component")
        if len({c.p for c in comps}) != 1:
            raise DomainError("all components must share the same p")
        object.__setattr__(self, "components", comps)

    @property
    def p(self) -> int:
        return self.components[0].p

    @property
    def n_components(self) -> int:
        return len(self.components)

    @property
    def variance(self) -> float:
        """Value at lag zero, i.e. the sum of amplitudes."""
        return float(sum(c.k0 for c in self.components))

    def __call__(self, tau):
        return spectral_matern_eval(tau, self)


def _check_tau(tau):
    tau = np.asarray(tau, dtype=float)
    if not np.all(np.isfinite(tau)):
        raise DomainError("lag must be finite")
    return tau


def _scalar_or_array(val):
    return float(val) if np.ndim(val) == 0 else val


def matern_eval(tau, comp: KernelComponent):
    """Matérn-(p+1/2) covariance ``k(tau)`` of a single component.

    The cosine modulation of ``comp`` is ignored here; see
    :func:`spectral_matern_eval`.
    """
    tau = _check_tau(tau)
    return _scalar_or_array(_raw_derivative(tau, 0, comp.k0, comp.l, comp.p))


def matern_derivative(tau, m: int, comp: KernelComponent):
    """m-th derivative of the Matérn kernel with respect to the lag.

    Parameters
    ----------
    tau : float or array_like
        Lag(s).
    m : int
        Derivative order, ``0 <= m <= 2p``.
    comp : KernelComponent
        Kernel parameters.

    Returns
    -------
    float or ndarray
        ``k^{(m)}(tau)``; odd orders are exactly zero at ``tau == 0``.
    """
    if m < 0 or m > 2 * comp.p:
        raise UnsupportedOrderError(
            f"derivative order {m} unsupported for p={comp.p} (max {2 * comp.p})"
        )
    tau = _check_tau(tau)
    val = _raw_derivative(tau, m, comp.k0, comp.l, comp.p)
    if m % 2:
        val = np.where(tau == 0.0, 0.0, val)
    return _scalar_or_array(val)


def matern_derivative_dlogl(tau, m: int, comp: KernelComponent):
    """Sensitivity of ``k^{(m)}(tau)`` to ``log l``.

    Uses the scaling identity ``d k^{(m)} / d log l = -m k^{(m)} - tau k^{(m+1)}``;
    the second term uses the one-sided form and vanishes at ``tau = 0``.
    """
    if m < 0 or m > 2 * comp.p:
        raise UnsupportedOrderError(
            f"derivative order {m} unsupported for p={comp.p} (max {2 * comp.p})"
        )
    tau = _check_tau(tau)
    base = matern_derivative(tau, m, comp)
    nxt = _raw_derivative(tau, m + 1, comp.k0, comp.l, comp.p)
    return _scalar_or_array(-m * np.asarray(base) - tau * nxt)


def spectral_matern_eval(tau, kern: SpectralMaternKernel):
    """``sum_i k_i(tau) cos(omega_i tau)`` over the components of ``kern``."""
    tau = _check_tau(tau)
    total = np.zeros_like(tau)
    for c in kern.components:
        total = total + _raw_derivative(tau, 0, c.k0, c.l, c.p) * np.cos(c.omega * tau)
    return _scalar_or_array(total)


@dataclass(frozen=True)
class TrendModel:
    """Parametric mean function: ``b0`` (constant) or ``b0 + b1 t`` (linear)."""

    kind: str = "linear"
    beta: np.ndarray = field(default_factory=lambda: np.zeros(2))

    def __post_init__(self):
        if self.kind not in TREND_KINDS:
            raise InputError(f"unknown trend kind {self.kind!r}")
        beta = np.asarray(self.beta, dtype=float).reshape(-1)
        if beta.size != trend_size(self.kind):
            raise DimensionError(
                f"{self.kind} trend needs {trend_size(self.kind)} coefficients, got {beta.size}"
            )
        object.__setattr__(self, "beta", beta)

    def mean(self, t: float) -> float:
        return float(self.beta @ self.basis(t))

    def basis(self, t: float) -> np.ndarray:
        """Gradient of the mean with respect to ``beta``."""
        if self.kind == "constant":
            return np.array([1.0])
        return np.array([1.0, float(t)])


def trend_size(kind: str) -> int:
    if kind not in TREND_KINDS:
        raise InputError(f"unknown trend kind {kind!r}")
    return 1 if kind == "constant" else 2


@dataclass(frozen=True)
class HyperParams:
    """Learnable parameters, positive ones stored as logs.

    Flat layout: ``beta``, ``log_sigma``, then ``(log_k0, log_l, log_omega)``
    for each component in index order.
    """

    beta: np.ndarray
    log_sigma: float
    log_k0: np.ndarray
    log_l: np.ndarray
    log_omega: np.ndarray
    trend: str = "linear"

    def __post_init__(self):
        beta = np.asarray(self.beta, dtype=float).reshape(-1)
        if beta.size != trend_size(self.trend):
            raise DimensionError(f"beta has length {beta.size} for {self.trend} trend")
        arrs = [np.asarray(a, dtype=float).reshape(-1) for a in (self.log_k0, self.log_l, self.log_omega)]
        if len({a.size for a in arrs}) != 1 or arrs[0].size == 0:
            raise DimensionError("per-component parameter arrays must share a non-zero length")
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "log_sigma", float(self.log_sigma))
        for name, a in zip(("log_k0", "log_l", "log_omega"), arrs):
            object.__setattr__(self, name, a)

    @property
    def n_components(self) -> int:
        return self.log_k0.size

    @property
    def size(self) -> int:
        return self.beta.size + 1 + 3 * self.n_components

    @property
    def sigma(self) -> float:
        return float(np.exp(self.log_sigma))

    @property
    def k0(self) -> np.ndarray:
        return np.exp(self.log_k0)

    @property
    def l(self) -> np.ndarray:
        return np.exp(self.log_l)

    @property
    def omega(self) -> np.ndarray:
        return np.exp(self.log_omega)

    def trend_model(self) -> TrendModel:
        return TrendModel(self.trend, self.beta)

    def kernel(self, p: int) -> SpectralMaternKernel:
        return SpectralMaternKernel(
            tuple(
                KernelComponent(float(k0), float(l), float(w), p)
                for k0, l, w in zip(self.k0, self.l, self.omega)
            )
        )

    def pack(self) -> np.ndarray:
        per = np.column_stack([self.log_k0, self.log_l, self.log_omega]).reshape(-1)
        return np.concatenate([self.beta, [self.log_sigma], per])

    @classmethod
    def unpack(cls, vec, n_components: int, trend: str = "linear") -> "HyperParams":
        vec = np.asarray(vec, dtype=float).reshape(-1)
        nb = trend_size(trend)
        expected = nb + 1 + 3 * n_components
        if vec.size != expected:
            raise DimensionError(f"expected flat vector of length {expected}, got {vec.size}")
        per = vec[nb + 1 :].reshape(n_components, 3)
        return cls(vec[:nb], vec[nb], per[:, 0], per[:, 1], per[:, 2], trend)

    def with_vector(self, vec) -> "HyperParams":
        return HyperParams.unpack(vec, self.n_components, self.trend)

    # flat-vector index helpers, used by the gradient code
    def index_beta(self) -> slice:
        return slice(0, self.beta.size)

    def index_log_sigma(self) -> int:
        return self.beta.size

    def index_component(self, i: int) -> tuple[int, int, int]:
        base = self.beta.size + 1 + 3 * i
        return base, base + 1, base + 2
