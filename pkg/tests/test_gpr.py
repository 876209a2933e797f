import math

import numpy as np
import pytest
from scipy.stats import multivariate_normal

from pmgp.errors import DimensionError, InputError, OrderingError
from pmgp.gpr import GPRProblem, log_marginal_likelihood, posterior
from pmgp.kernels import KernelComponent, SpectralMaternKernel, TrendModel


def kern1(k0=1.0, l=1.0, omega=0.0, p=1):
    return SpectralMaternKernel((KernelComponent(k0, l, omega, p),))


def test_single_point_marginal():
    prob = GPRProblem([0.0], [0.7], kern1(), TrendModel("constant", [0.0]), 1.0)
    assert log_marginal_likelihood(prob) == pytest.approx(-0.5 * math.log(2 * math.pi * 2) - 0.49 / 4)


def test_matches_scipy_mvn():
    rng = np.random.default_rng(0)
    kern = SpectralMaternKernel((KernelComponent(1.2, 0.8, 1.5, 2), KernelComponent(0.4, 2.0, 0.2, 2)))
    trend = TrendModel("linear", [0.3, -0.1])
    t = np.sort(rng.uniform(0, 6, 15))
    y = rng.normal(size=15)
    prob = GPRProblem(t, y, kern, trend, 0.5)
    cov = kern(t[:, None] - t[None, :]) + 0.25 * np.eye(15)
    ref = multivariate_normal(0.3 - 0.1 * t, cov).logpdf(y)
    assert log_marginal_likelihood(prob) == pytest.approx(ref, rel=1e-12)


def test_empty_posterior_is_prior():
    kern = SpectralMaternKernel((KernelComponent(1.2, 1.0, 0.0, 1), KernelComponent(0.3, 1.0, 1.0, 1)))
    prob = GPRProblem([], [], kern, TrendModel("linear", [1.0, 2.0]), 0.1)
    post = posterior(prob, 2.0)
    assert post.mean == pytest.approx(5.0)
    assert post.var == pytest.approx(1.5)


def test_posterior_variance_below_prior():
    rng = np.random.default_rng(1)
    kern = kern1(2.0, 0.7, 0.5, 2)
    t = np.sort(rng.uniform(0, 5, 12))
    prob = GPRProblem(t, rng.normal(size=12), kern, TrendModel("constant", [0.0]), 0.3)
    for ts in np.linspace(-1, 7, 17):
        assert posterior(prob, ts).var <= kern.variance + 1e-12


def test_misspecified_noise_lowers_evidence():
    rng = np.random.default_rng(2)
    kern = kern1(1.0, 1.0, 0.0, 1)
    t = np.linspace(0, 20, 60)
    cov = kern(t[:, None] - t[None, :]) + 0.01 * np.eye(60)
    y = rng.multivariate_normal(np.zeros(60), cov)
    trend = TrendModel("constant", [0.0])
    good = log_marginal_likelihood(GPRProblem(t, y, kern, trend, 0.1))
    bad = log_marginal_likelihood(GPRProblem(t, y, kern, trend, 10.0))
    assert good > bad


def test_validation():
    trend = TrendModel("constant", [0.0])
    with pytest.raises(DimensionError):
        GPRProblem([0.0, 1.0], [1.0], kern1(), trend, 1.0)
    with pytest.raises(OrderingError):
        GPRProblem([1.0, 0.0], [1.0, 2.0], kern1(), trend, 1.0)
    with pytest.raises(InputError):
        GPRProblem([0.0], [1.0], kern1(), trend, 0.0)
    with pytest.raises(InputError):
        log_marginal_likelihood(GPRProblem([], [], kern1(), trend, 1.0))
