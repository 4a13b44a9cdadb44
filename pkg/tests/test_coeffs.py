import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from parakern import coeffs
from parakern.errors import NonPositiveTau, SingularMatrix
from conftest import all_kinds


def test_eval_constant_identity(identity1):
    assert coeffs.eval_coeff(identity1, 3.7) == np.eye(1)


def test_eval_piecewise_breakpoint_lookup(piecewise1):
    assert coeffs.eval_coeff(piecewise1, -1.0)[0, 0] == 2.0
    assert coeffs.eval_coeff(piecewise1, 0.0)[0, 0] == 0.5
    assert coeffs.eval_coeff(piecewise1, 5.0)[0, 0] == 0.5


def test_eval_smooth_periodic(smooth1):
    assert coeffs.eval_coeff(smooth1, np.pi / 2)[0, 0] == pytest.approx(1.5, abs=1e-14)


def test_averaged_constant(identity2):
    pair = coeffs.averaged_matrix(identity2, 5.0, 2.0)
    assert np.allclose(pair.A, 2.0 * np.eye(2))
    assert np.allclose(pair.B, 0.5 * np.eye(2))
    assert pair.det_b == pytest.approx(0.25, rel=1e-14)


def test_averaged_smooth_against_scipy_quad(smooth1):
    # independent adaptive quadrature oracle
    pair = coeffs.averaged_matrix(smooth1, np.pi, np.pi)
    oracle, _ = quad(lambda r: 1 + 0.5 * np.sin(r), 0.0, np.pi, epsabs=1e-13)
    assert pair.A[0, 0] == pytest.approx(oracle, abs=1e-11)
    assert pair.A[0, 0] == pytest.approx(np.pi + 1.0, abs=1e-11)


def test_averaged_smooth_closed_form_antiderivative(smooth1):
    # exact antiderivative of 1 + 0.5 sin r as a second oracle
    t, tau = 2.3, 1.9
    exact = tau + 0.5 * (np.cos(t - tau) - np.cos(t))
    pair = coeffs.averaged_matrix(smooth1, t, tau)
    assert pair.A[0, 0] == pytest.approx(exact, abs=1e-12)


def test_averaged_piecewise_interval_sum(piecewise1):
    pair = coeffs.averaged_matrix(piecewise1, 1.0, 2.0)
    assert pair.A[0, 0] == pytest.approx(2.5, abs=1e-14)
    # midpoint-rule oracle
    rs = np.linspace(-1.0, 1.0, 200001)[:-1] + 0.5e-5
    mid = np.mean([coeffs.eval_coeff(piecewise1, r)[0, 0] for r in rs[::100]])
    assert pair.A[0, 0] / 2.0 == pytest.approx(mid, abs=1e-3)


def test_nonpositive_tau_rejected(identity1):
    with pytest.raises(NonPositiveTau):
        coeffs.averaged_matrix(identity1, 0.0, 0.0)
    with pytest.raises(NonPositiveTau):
        coeffs.additivity_residual(identity1, 0.0, 1.0, -1.0)


def test_singular_matrix_detected():
    with pytest.raises(SingularMatrix):
        coeffs.pair_from_matrix(np.array([[1.0, 2.0], [2.0, 1.0]]), 0.0, 1.0)


def test_additivity_examples(identity1, smooth1, piecewise1):
    assert coeffs.additivity_residual(identity1, 0.0, 1.0, 2.0) == 0.0
    assert coeffs.additivity_residual(smooth1, 0.3, 0.7, 1.1) <= 1e-10
    assert coeffs.additivity_residual(piecewise1, 1.0, 0.5, 1.5) <= 1e-13


def test_additivity_across_kinds_random_triples():
    rng = np.random.default_rng(11)
    for field in all_kinds(1) + all_kinds(2):
        for _ in range(40):
            t = rng.uniform(-4, 4)
            tau1, tau2 = rng.uniform(0.05, 2.0, size=2)
            assert coeffs.additivity_residual(field, t, tau1, tau2) <= 1e-10


@settings(max_examples=150, deadline=None)
@given(t=st.floats(-6, 6), tau=st.floats(0.01, 5.0),
       z0=st.floats(-3, 3), z1=st.floats(-3, 3))
def test_rayleigh_ellipticity_bracket(t, tau, z0, z1):
    field = coeffs.random_piecewise_field(2, 0.5, seed=5)
    xi = np.array([z0, z1])
    if np.linalg.norm(xi) < 1e-3:
        return
    q = coeffs.rayleigh_bounds(field, t, tau, xi)
    assert field.lam * tau * (1 - 1e-9) <= q <= tau / field.lam * (1 + 1e-9)


def test_cholesky_spd_everywhere():
    rng = np.random.default_rng(2)
    for field in all_kinds(2):
        for _ in range(50):
            pair = coeffs.averaged_matrix(field, rng.uniform(-4, 4),
                                          rng.uniform(0.01, 4.0))
            # A B = I to 1e-12 relative
            assert np.allclose(pair.A @ pair.B, np.eye(2), atol=1e-12)
            assert pair.det_b > 0
            w = np.linalg.eigvalsh(pair.B)
            tau = pair.tau
            assert w.min() >= field.lam / tau * (1 - 1e-9)
            assert w.max() <= 1.0 / (field.lam * tau) * (1 + 1e-9)


def test_quad_form_routes_agree(random2):
    rng = np.random.default_rng(0)
    pair = coeffs.averaged_matrix(random2, 0.4, 1.3)
    X = rng.standard_normal((64, 2))
    assert np.allclose(pair.quad_form_b(X), pair.quad_form_b_chol(X),
                       rtol=1e-12, atol=1e-14)


def test_warm_pair_cache_matches_direct(smooth1):
    coeffs.clear_pair_cache()
    taus = np.linspace(0.1, 3.0, 17)
    coeffs.warm_pair_cache(smooth1, 0.7, taus)
    for tau in taus:
        cached = coeffs.averaged_pair_cached(smooth1, 0.7, tau)
        direct = coeffs.averaged_matrix(smooth1, 0.7, tau)
        assert np.allclose(cached.A, direct.A, atol=5e-11)


def test_field_validation():
    with pytest.raises(ValueError):
        coeffs.constant_field([[1.0, 0.3], [0.2, 1.0]])  # not symmetric
    with pytest.raises(ValueError):
        coeffs.piecewise_field([1.0, 0.0], [np.eye(1)] * 3)  # unordered breaks
    with pytest.raises(ValueError):
        coeffs.constant_field(np.eye(2) * 4.0, lam=0.9)  # spectrum escapes
