import math

import numpy as np
import pytest

from pmgp.errors import InputError, OrderingError
from pmgp.filter import (
    FilterState,
    filtered_latent,
    forecast,
    gaussian_logpdf,
    init_state,
    local_loglik,
    predict_state,
    update,
)
from pmgp.gpr import GPRProblem, log_marginal_likelihood, posterior
from pmgp.kernels import HyperParams
from pmgp.statespace import measurement_vector


def make_theta(n_comp=1, log_sigma=0.0, trend="linear", rng=None, log_omega=None):
    size = (1 if trend == "constant" else 2) + 1 + 3 * n_comp
    vec = np.zeros(size)
    if rng is not None:
        vec = rng.uniform(-0.7, 0.7, size)
    theta = HyperParams.unpack(vec, n_comp, trend)
    if log_omega is not None:
        theta = HyperParams(theta.beta, theta.log_sigma, theta.log_k0, theta.log_l, log_omega, trend)
    return HyperParams(theta.beta, log_sigma, theta.log_k0, theta.log_l, theta.log_omega, trend)


def run(theta, p, t, y):
    state = init_state(theta, p)
    total = 0.0
    for tk, yk in zip(t, y):
        total += local_loglik(state, tk, yk)
        state, _ = update(state, tk, yk)
    return state, total


def test_uninitialized_predict_is_prior():
    theta = make_theta(2)
    state = init_state(theta, 1)
    m, P = predict_state(state, 3.0)
    np.testing.assert_array_equal(m, 0.0)
    np.testing.assert_array_equal(P, state.P)
    assert state.d == 8


def test_ou_predict_example():
    # p=0, n=0, k0=l=sigma=1 with omega -> 0 so H = (1, 0)
    theta = make_theta(1, log_omega=np.array([-60.0]))
    state = init_state(theta, 0)
    state, _ = update(state, 0.0, 2.0)
    np.testing.assert_allclose(state.m, [1.0, 0.0], atol=1e-12)
    for dt in (0.3, 1.0, 4.0):
        m, _ = predict_state(state, dt)
        np.testing.assert_allclose(m[0], math.exp(-dt), rtol=1e-12)


def test_long_gap_returns_to_prior():
    theta = make_theta(2)
    state, _ = run(theta, 1, [0.0, 0.5], [1.0, -2.0])
    m, P = predict_state(state, 1e4)
    np.testing.assert_allclose(m, 0.0, atol=1e-10)
    np.testing.assert_allclose(P, init_state(theta, 1).P, atol=1e-10)


def test_huge_noise_leaves_mean():
    theta = make_theta(1, log_sigma=0.5 * math.log(1e12))
    state, _ = run(theta, 1, [0.0, 1.0], [0.4, 0.9])
    m_minus, _ = predict_state(state, 2.0)
    new, _ = update(state, 2.0, 50.0)
    np.testing.assert_allclose(new.m, m_minus, atol=1e-6)


def test_zero_innovation_keeps_mean_but_shrinks_cov():
    theta = make_theta(2, rng=np.random.default_rng(1))
    state, _ = run(theta, 2, [0.0, 0.7], [0.3, -0.2])
    obs, _ = forecast(state, 1.5)
    m_minus, P_minus = predict_state(state, 1.5)
    new, pred = update(state, 1.5, obs.mean)
    np.testing.assert_allclose(new.m, m_minus, atol=1e-14)
    assert np.trace(new.P) < np.trace(P_minus)
    assert pred.mean == obs.mean


def test_forecast_is_read_only():
    theta = make_theta(2, rng=np.random.default_rng(2))
    state, _ = run(theta, 2, [0.0, 1.0, 2.0], [1.0, 0.5, 0.1])
    m, P = state.m.copy(), state.P.copy()
    a = forecast(state, 2.5)
    forecast(state, 10.0)
    b = forecast(state, 2.5)
    np.testing.assert_array_equal(state.m, m)
    np.testing.assert_array_equal(state.P, P)
    assert a == b


def test_prior_forecast():
    theta = make_theta(2, log_sigma=math.log(0.3), rng=np.random.default_rng(3))
    state = init_state(theta, 1)
    obs, lat = forecast(state, 2.0)
    assert obs.mean == pytest.approx(theta.trend_model().mean(2.0))
    assert lat.var == pytest.approx(theta.k0.sum())
    assert obs.var == pytest.approx(theta.k0.sum() + 0.09)


def test_loglik_examples():
    assert gaussian_logpdf(1.0, 1.0, 1.0) == pytest.approx(-0.918939, abs=1e-6)
    assert gaussian_logpdf(3.0, 3.0, 1 / (2 * math.pi)) == pytest.approx(0.0, abs=1e-15)


def test_local_loglik_equals_predictive_density():
    theta = make_theta(2, rng=np.random.default_rng(4))
    state, _ = run(theta, 1, [0.0, 1.0], [0.2, 0.4])
    obs, _ = forecast(state, 1.6)
    assert local_loglik(state, 1.6, 0.9) == pytest.approx(gaussian_logpdf(0.9, obs.mean, obs.var))


def test_posterior_contraction_and_variance_floor():
    rng = np.random.default_rng(5)
    theta = make_theta(2, rng=rng)
    state = init_state(theta, 2)
    t = np.cumsum(rng.uniform(0.05, 1.0, 40))
    for tk in t:
        _, P_minus = predict_state(state, tk)
        obs, lat = forecast(state, tk)
        assert obs.var >= theta.sigma**2 * (1 - 1e-10)
        assert lat.var >= 0
        state, _ = update(state, tk, rng.normal())
        Hk = measurement_vector(tk, theta.omega, 2)
        assert Hk @ state.P @ Hk <= Hk @ P_minus @ Hk + 1e-12
        np.testing.assert_array_equal(state.P, state.P.T)


@pytest.mark.parametrize("p", [0, 1, 2])
@pytest.mark.parametrize("n_comp", [1, 2, 3])
def test_matches_dense_gpr(p, n_comp):
    rng = np.random.default_rng(10 * p + n_comp)
    theta = make_theta(n_comp, rng=rng)
    t = np.sort(rng.uniform(0, 10, 25))
    y = rng.normal(size=t.size)
    state, total = run(theta, p, t, y)
    prob = GPRProblem(t, y, theta.kernel(p), theta.trend_model(), theta.sigma)
    np.testing.assert_allclose(total, log_marginal_likelihood(prob), rtol=1e-9)
    for ts in (10.2, 11.0, 13.5):
        _, lat = forecast(state, ts)
        ref = posterior(prob, ts)
        np.testing.assert_allclose([lat.mean, lat.var], [ref.mean, ref.var], rtol=1e-8)
    filt = filtered_latent(state)
    ref = posterior(prob, t[-1])
    np.testing.assert_allclose([filt.mean, filt.var], [ref.mean, ref.var], rtol=1e-8)


def test_time_and_value_errors():
    theta = make_theta(1)
    state, _ = run(theta, 1, [0.0, 1.0], [0.0, 1.0])
    with pytest.raises(OrderingError):
        update(state, 1.0, 0.0)
    with pytest.raises(OrderingError):
        forecast(state, 0.5)
    with pytest.raises(InputError):
        update(state, 2.0, float("nan"))
    with pytest.raises(InputError):
        filtered_latent(init_state(theta, 1))


def test_state_is_immutable_record():
    theta = make_theta(1)
    state = init_state(theta, 1)
    new, _ = update(state, 0.0, 1.0)
    assert isinstance(new, FilterState)
    assert not state.initialized and new.initialized
    assert new.k == 1 and new.t_last == 0.0
