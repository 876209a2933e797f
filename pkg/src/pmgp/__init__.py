"""Online Gaussian process forecasting with spectral Matérn kernels.

The GP posterior under a sum of cosine/sine-modulated half-integer Matérn
components is computed exactly by a Kalman filter on the derivative-augmented
state, so each observation costs time independent of the series length.
Hyperparameters are learned online by passive-aggressive steps on the local
log-likelihood.
"""

from .baselines import ARModel, nmae
from .errors import (
    ConditioningError,
    DegenerateSeriesError,
    DimensionError,
    DomainError,
    InputError,
    OrderingError,
    PMGPError,
    UnsupportedOrderError,
)
from .filter import FilterState, Predictive, forecast, init_state, local_loglik, update
from .gpr import GPRProblem, log_marginal_likelihood, posterior
from .kernels import HyperParams, KernelComponent, SpectralMaternKernel, matern_derivative, matern_eval
from .learner import OnlineForecaster, PAConfig, grad_local_loglik, initial_theta, pa_update, step
from .statespace import assemble, component_transition

__version__ = "0.1.0"

__all__ = [
    "ARModel",
    "nmae",
    "ConditioningError",
    "DegenerateSeriesError",
    "DimensionError",
    "DomainError",
    "InputError",
    "OrderingError",
    "PMGPError",
    "UnsupportedOrderError",
    "FilterState",
    "Predictive",
    "forecast",
    "init_state",
    "local_loglik",
    "update",
    "GPRProblem",
    "log_marginal_likelihood",
    "posterior",
    "HyperParams",
    "KernelComponent",
    "SpectralMaternKernel",
    "matern_derivative",
    "matern_eval",
    "OnlineForecaster",
    "PAConfig",
    "grad_local_loglik",
    "initial_theta",
    "pa_update",
    "step",
    "assemble",
    "component_transition",
]
