import numpy as np
import pytest
from scipy.integrate import quad
from scipy.special import erf

from parakern import coeffs, corrections
from parakern.errors import QuadratureFailure
from conftest import all_kinds

# frozen values from the 1-D quadrature oracle below (and erf closed forms)
J_IDENTITY_1D = 0.5204998778130465
I11_IDENTITY_1D = 0.4795001221869535


def oracle_E_exterior(a):
    """Independent 1-D oracle: integral of e^{-x^2}/sqrt(pi) over |2 sqrt(a) x| >= 1."""
    val, _ = quad(lambda x: np.exp(-x**2) / np.sqrt(np.pi),
                  1.0 / (2 * np.sqrt(a)), np.inf, epsabs=1e-13)
    return 2.0 * val


def test_identity_reference_values(identity1):
    cv = corrections.correction_pair(identity1, 0.0)
    assert cv.J == pytest.approx(J_IDENTITY_1D, abs=1e-10)
    assert cv.I[0, 0] == pytest.approx(I11_IDENTITY_1D, abs=1e-10)
    # cross-check the frozen constants against the quadrature oracle and erf
    assert oracle_E_exterior(1.0) == pytest.approx(I11_IDENTITY_1D, abs=1e-12)
    assert 1.0 - erf(0.5) == pytest.approx(I11_IDENTITY_1D, abs=1e-15)


def test_scalar_field_reduction():
    # for a = lam (1-D) the integrand ratios collapse and
    # I11 = (1/a) * (integral of the Gaussian over the exterior region)
    for a in (0.5, 2.0, 4.0):
        field = coeffs.constant_field([[a]], lam=min(a, 1 / a, 1.0))
        got = corrections.correction_I(field, 0.0)[0, 0]
        assert got == pytest.approx(oracle_E_exterior(a) / a, abs=1e-10)
        assert corrections.correction_J(field, 0.0) == \
            pytest.approx(erf(1.0 / (2 * np.sqrt(a))), abs=1e-10)


def test_n2_values(identity2):
    cv = corrections.correction_pair(identity2, 0.0)
    assert cv.J == pytest.approx(1.0 - np.exp(-0.25), abs=1e-10)
    # off-diagonal entries vanish by parity
    assert abs(cv.I[0, 1]) <= 1e-8
    assert abs(cv.I[1, 0]) <= 1e-8


def test_rotation_invariance_scaled_identity():
    field = coeffs.constant_field(0.7 * np.eye(2), lam=0.7)
    cv = corrections.correction_pair(field, 0.0)
    assert cv.I[0, 0] == pytest.approx(cv.I[1, 1], abs=1e-8)
    assert abs(cv.I[0, 1]) <= 1e-8


def test_orderings_coincide_for_symmetric_a(random2):
    std = corrections.correction_I(random2, 0.35, ordering="standard")
    drv = corrections.correction_I(random2, 0.35, ordering="derivation")
    assert np.allclose(std, drv, atol=1e-10)
    assert corrections.correction_pair(random2, 0.35).ordering_gap <= 1e-10


def test_eigendecomposition_oracle(random2):
    """Diagonalize a = Q D Q^T; the rotated moment matrix is diagonal with
    entries given by scalar radial integrals, an independent route to I."""
    t = -1.2
    a = coeffs.eval_coeff(random2, t)
    d, Q = np.linalg.eigh(a)
    N = np.zeros((2, 2))
    for i in range(2):
        def integrand(z, i=i):
            # angular reduction of the rotated integrand on circles
            th = np.linspace(0, 2 * np.pi, 512, endpoint=False)
            c = np.cos(th) if i == 0 else np.sin(th)
            vals = np.exp(-z**2 * (np.cos(th) ** 2 / d[0] + np.sin(th) ** 2 / d[1]))
            return z * np.mean(vals * c**2) * 2 * np.pi
        val, _ = quad(integrand, 0.5, 12.0, epsabs=1e-12, limit=200)
        N[i, i] = val / d[i]
    expect = Q @ N @ Q.T * np.pi ** (-1.0) / np.sqrt(np.linalg.det(a))
    got = corrections.correction_I(random2, t)
    assert np.allclose(got, expect, atol=1e-8)


def test_trace_identity_all_kinds():
    rng = np.random.default_rng(4)
    for field in all_kinds(1) + all_kinds(2, seed=8):
        for t in rng.uniform(-4, 4, size=10):
            assert corrections.trace_identity_residual(field, float(t)) <= 2e-8


def test_boundedness_under_refinement(random2):
    c1 = corrections.correction_pair(random2, 0.1, panels=24, m_sphere=64)
    c2 = corrections.correction_pair(random2, 0.1, panels=48, m_sphere=128)
    assert np.max(np.abs(c1.I - c2.I)) <= 1e-9
    assert np.max(np.abs(c1.I)) <= 2.0 / random2.lam  # finite, lam-controlled


def test_quadrature_failure_raised(identity1):
    with pytest.raises(QuadratureFailure):
        corrections.correction_pair(identity1, 0.0, tol=1e-18, panels=4, m_sphere=8)


def test_limit_consistency_monotone(identity1, smooth1):
    rows = corrections.limit_consistency(identity1, 0.0, [0.5, 0.25, 0.125])
    errs = [r["error"] for r in rows]
    assert errs[0] > errs[1] > errs[2]
    # constant field: deviation is O(eps^2) through the e^{-eps^2 tau} factor
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.15)
    rows = corrections.limit_consistency(smooth1, 0.3, [0.4, 0.2, 0.1])
    errs = [r["error"] for r in rows]
    assert errs[0] > errs[1] > errs[2]


def test_limit_consistency_single_eps(identity1):
    rows = corrections.limit_consistency(identity1, 1.0, [0.3])
    assert len(rows) == 1
    assert rows[0]["error"] <= 0.5 * 0.3**2  # <= C eps^2 with modest C


def test_limit_consistency_validates_eps(identity1):
    with pytest.raises(ValueError):
        corrections.limit_consistency(identity1, 0.0, [0.1, 0.2])
