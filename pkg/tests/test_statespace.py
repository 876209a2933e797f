import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pmgp.errors import ConditioningError, OrderingError
from pmgp.kernels import KernelComponent, SpectralMaternKernel, spectral_matern_eval
from pmgp.statespace import (
    assemble,
    cholesky_psd,
    component_transition,
    dgp_cross_cov,
    measurement_vector,
    prior_covariance,
    transition_sensitivity,
)


def joint_conditioning(u, v, comp):
    """Condition x_u on x_v by building the full joint covariance."""
    n = comp.p + 1
    Kuu = dgp_cross_cov(u, u, comp).entries
    Kuv = dgp_cross_cov(u, v, comp).entries
    Kvu = dgp_cross_cov(v, u, comp).entries
    Kvv = dgp_cross_cov(v, v, comp).entries
    joint = np.block([[Kuu, Kuv], [Kvu, Kvv]])
    S_uv, S_vv = joint[:n, n:], joint[n:, n:]
    F = S_uv @ np.linalg.inv(S_vv)
    return F, joint[:n, :n] - F @ joint[n:, :n]


def test_cross_cov_examples():
    np.testing.assert_allclose(dgp_cross_cov(2.0, 2.0, KernelComponent(1.0, 1.0, p=0)).entries, [[1.0]])
    np.testing.assert_allclose(
        dgp_cross_cov(0.5, 0.5, KernelComponent(1.0, 1.0, p=1)).entries, [[1.0, 0.0], [0.0, 3.0]], atol=1e-14
    )
    np.testing.assert_allclose(
        dgp_cross_cov(1.0, 0.0, KernelComponent(1.0, 2.0, p=0)).entries, [[0.606531]], atol=1e-6
    )


def test_cross_cov_transpose_symmetry():
    comp = KernelComponent(1.3, 0.8, p=2)
    A = dgp_cross_cov(1.7, 0.4, comp).entries
    B = dgp_cross_cov(0.4, 1.7, comp).entries
    np.testing.assert_allclose(A, B.T, rtol=1e-13)


def test_ou_transition():
    for dt in (0.1, 1.0, 2.5):
        tr = component_transition(dt, 0.0, KernelComponent(1.0, 1.0, p=0))
        np.testing.assert_allclose(tr.F, [[math.exp(-dt)]], rtol=1e-13)
        np.testing.assert_allclose(tr.K_cond, [[1 - math.exp(-2 * dt)]], rtol=1e-12)


@pytest.mark.parametrize("p", [0, 1, 2, 3])
def test_long_gap_forgets(p):
    comp = KernelComponent(1.5, 0.5, p=p)
    tr = component_transition(500.0, 0.0, comp)
    np.testing.assert_allclose(tr.F, 0.0, atol=1e-12)
    np.testing.assert_allclose(tr.K_cond, prior_covariance(comp), rtol=1e-10)


def test_brute_force_example():
    comp = KernelComponent(1.0, 1.0, p=1)
    tr = component_transition(0.7, 0.0, comp)
    F, K = joint_conditioning(0.7, 0.0, comp)
    np.testing.assert_allclose(tr.F, F, rtol=1e-10)
    np.testing.assert_allclose(tr.K_cond, K, rtol=1e-10)


@pytest.mark.parametrize("p", [0, 1, 2, 3])
def test_marginal_consistency_and_brute_force(p):
    rng = np.random.default_rng(p)
    for _ in range(20):
        comp = KernelComponent(rng.uniform(0.2, 3), rng.uniform(0.3, 3), 0.0, p)
        v = rng.uniform(-5, 5)
        u = v + rng.uniform(0.05, 3)
        tr = component_transition(u, v, comp)
        K = prior_covariance(comp)
        np.testing.assert_allclose(tr.F @ K @ tr.F.T + tr.K_cond, K, rtol=1e-8, atol=1e-8 * np.abs(K).max())
        F, Kc = joint_conditioning(u, v, comp)
        np.testing.assert_allclose(tr.F, F, rtol=1e-8, atol=1e-10)
        np.testing.assert_allclose(tr.K_cond, Kc, rtol=1e-8, atol=1e-10 * np.abs(K).max())


def test_transition_rejects_bad_order():
    comp = KernelComponent(1.0, 1.0, p=1)
    with pytest.raises(OrderingError):
        component_transition(1.0, 1.0, comp)
    with pytest.raises(OrderingError):
        transition_sensitivity(0.0, 1.0, comp)


def test_cholesky_examples():
    np.testing.assert_array_equal(cholesky_psd(np.zeros((3, 3))), np.zeros((3, 3)))
    np.testing.assert_allclose(cholesky_psd(np.eye(4)), np.eye(4))
    L = cholesky_psd(np.array([[4.0, 2.0], [2.0, 2.0]]))
    np.testing.assert_allclose(L, [[2.0, 0.0], [1.0, 1.0]])
    np.testing.assert_allclose(L @ L.T, [[4.0, 2.0], [2.0, 2.0]])


def test_cholesky_reports_path():
    _, method = cholesky_psd(np.eye(2), return_method=True)
    assert method == "cholesky"
    # rank-one PSD: plain Cholesky fails, jitter or eigh recovers it
    v = np.array([1.0, 2.0, 3.0])
    L, method = cholesky_psd(np.outer(v, v), return_method=True)
    assert method != "cholesky"
    np.testing.assert_allclose(L @ L.T, np.outer(v, v), atol=1e-6)


def test_cholesky_rejects_indefinite_and_asymmetric():
    with pytest.raises(ConditioningError):
        cholesky_psd(np.array([[1.0, 0.0], [0.0, -1.0]]))
    with pytest.raises(ConditioningError):
        cholesky_psd(np.array([[1.0, 0.5], [0.0, 1.0]]))


def test_small_gap_transition_is_finite():
    comp = KernelComponent(1.0, 1.0, p=2)
    tr = component_transition(1e-9, 0.0, comp)
    assert np.all(np.isfinite(tr.L))
    np.testing.assert_allclose(tr.F, np.eye(3), atol=1e-6)


def test_assemble_dimensions_and_h():
    kern = SpectralMaternKernel((KernelComponent(1.0, 1.0, 2.0, 0),))
    m = assemble(None, 0.3, kern)
    assert m.d == 2
    np.testing.assert_allclose(m.H, [math.cos(0.6), math.sin(0.6)])
    assert m.F is None

    kern = SpectralMaternKernel(tuple(KernelComponent(1.0, 1.0, w, 2) for w in (1, 2, 3, 4, 5)))
    m = assemble(0.0, 1.0, kern)
    assert m.d == 30
    assert m.F.shape == m.K_cond.shape == (30, 30)
    np.testing.assert_allclose(m.L @ m.L.T, m.K_cond, atol=1e-10)

    H0 = measurement_vector(0.0, [1.0, 2.0, 3.0], 1)
    np.testing.assert_array_equal(H0[0::4], 1.0)
    np.testing.assert_array_equal(H0[2::4], 0.0)
    np.testing.assert_array_equal(H0[1::2], 0.0)


def test_assemble_rejects_non_increasing_time():
    kern = SpectralMaternKernel((KernelComponent(1.0, 1.0, 0.0, 1),))
    with pytest.raises(OrderingError):
        assemble(1.0, 1.0, kern)


@st.composite
def kernel_and_pair(draw):
    p = draw(st.integers(0, 3))
    n = draw(st.integers(1, 3))
    comps = tuple(
        KernelComponent(draw(st.floats(0.1, 3)), draw(st.floats(0.2, 3)), draw(st.floats(0, 6)), p)
        for _ in range(n)
    )
    times = sorted(draw(st.lists(st.floats(-5, 5), min_size=3, max_size=6, unique=True)))
    return SpectralMaternKernel(comps), np.array(times)


@settings(max_examples=60, deadline=None)
@given(kernel_and_pair())
def test_propagated_latent_covariance_matches_kernel(case):
    # cov(z_u, z_v) = H_u (F_{u<-..<-v}) P_v H_v with P_v the stationary prior
    kern, t = case
    if np.min(np.diff(t)) < 1e-3:
        return
    first = assemble(None, t[0], kern)
    P0 = first.K_prior
    Phi = np.eye(first.d)
    for j in range(1, t.size):
        model = assemble(t[j - 1], t[j], kern)
        Phi = model.F @ Phi
        got = model.H @ Phi @ P0 @ first.H
        want = spectral_matern_eval(t[j] - t[0], kern)
        np.testing.assert_allclose(got, want, rtol=1e-8, atol=1e-10 * kern.variance)
