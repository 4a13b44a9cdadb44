"""Multiplication-operator correction terms in the derivative formulas.

The pointwise formulas for second spatial derivatives and the time derivative
of solutions carry, besides principal-value integrals, the bounded
multiplication terms

    I_ij(a)(t) = integral over {|2 a(t)^{1/2} x| >= 1} of
                 e^{-|x|^2} pi^{-n/2} (a^{-1/2} x)_j (a^{1/2} x)_i / |a^{1/2} x|^2
    J(a)(t)    = integral over {|2 a(t)^{1/2} x| <= 1} of e^{-|x|^2} pi^{-n/2},

tied together by the trace identity  J(a)(t) + a^{ij}(t) I_ij(a)(t) = 1
(the directional factor contracts against a to exactly 1, and the Gaussian
has total mass pi^{n/2}).

Everything is integrated in y = a(t)^{1/2} x coordinates, where the region
becomes the exterior/interior of the Euclidean ball of radius 1/2 and the
integrand decays like e^{-lam |y|^2}: radial composite Gauss-Legendre times a
spherical rule (two-point in 1-D, trapezoid circle in 2-D, product rule in
3-D).  The two published index orderings of the I integrand coincide for
symmetric a (the rotated off-diagonal moments vanish by parity); both are
computed and their gap is reported as a quadrature diagnostic.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .coeffs import CoefficientField, averaged_pair_cached, eval_coeff
from .errors import QuadratureFailure
from .kernel import slice_values
from .quad import composite_gl as _composite_gl


def sphere_rule(n, m=64):
    """Unit-sphere nodes and weights integrating dS exactly enough.

    n=1: the two-point set {-1, +1} with counting measure.
    n=2: m-point trapezoid on the circle (spectrally accurate).
    n=3: Gauss-Legendre in the polar cosine x trapezoid in azimuth.
    """
    if n == 1:
        return np.array([[1.0], [-1.0]]), np.array([1.0, 1.0])
    if n == 2:
        phi = 2.0 * np.pi * np.arange(m) / m
        theta = np.stack([np.cos(phi), np.sin(phi)], axis=1)
        return theta, np.full(m, 2.0 * np.pi / m)
    if n == 3:
        nu, wu = np.polynomial.legendre.leggauss(max(m // 4, 8))
        phi = 2.0 * np.pi * np.arange(m) / m
        u, f = np.meshgrid(nu, phi, indexing="ij")
        s = np.sqrt(1.0 - u**2)
        theta = np.stack([s * np.cos(f), s * np.sin(f), u], axis=-1).reshape(-1, 3)
        w = (wu[:, None] * np.full(m, 2.0 * np.pi / m)[None, :]).ravel()
        return theta, w
    raise NotImplementedError("sphere quadrature provided for n <= 3")


def _radius_cut(lam, tail=1e-12):
    return max(8.0, float(np.sqrt(np.log(1.0 / tail) / lam)) + 2.0)


def _raw_integrals(a, lam, panels, m_sphere, region):
    """Radial x spherical quadrature of the Gaussian e^{-<a^{-1}y,y>} against
    the matrix moment theta (a^{-1}theta)^T and the scalar 1, over the
    interior (region='in') or exterior (region='out') of the 1/2-ball."""
    n = a.shape[0]
    a_inv = np.linalg.inv(a)
    theta, w_s = sphere_rule(n, m_sphere)
    quad = np.einsum("si,ij,sj->s", theta, a_inv, theta)
    ainv_theta = theta @ a_inv
    if region == "out":
        r, w_r = _composite_gl(0.5, _radius_cut(lam), panels)
    else:
        r, w_r = _composite_gl(0.0, 0.5, panels)
    radial = np.exp(-np.outer(r**2, quad)) * (r ** (n - 1))[:, None] * w_r[:, None]
    angular = radial * w_s[None, :]
    scalar = float(np.sum(angular))
    moment = np.einsum("rs,si,sj->ij", angular, theta, ainv_theta)
    return scalar, moment


@lru_cache(maxsize=4096)
def _corrections_at(field: CoefficientField, t: float, panels: int, m_sphere: int):
    a = eval_coeff(field, t)
    norm = np.pi ** (-field.n / 2.0) / np.sqrt(np.linalg.det(a))
    j_raw, _ = _raw_integrals(a, field.lam, panels, m_sphere, "in")
    _, i_raw = _raw_integrals(a, field.lam, panels, m_sphere, "out")
    return norm * j_raw, norm * i_raw


@dataclass(frozen=True)
class CorrectionValue:
    t: float
    I: np.ndarray
    J: float
    ordering_gap: float


def correction_pair(field: CoefficientField, t: float, tol=1e-8,
                    panels=24, m_sphere=64) -> CorrectionValue:
    """I(a)(t) and J(a)(t) with a one-step refinement error check."""
    j1, m1 = _corrections_at(field, float(t), panels, m_sphere)
    j2, m2 = _corrections_at(field, float(t), 2 * panels, 2 * m_sphere)
    err = max(abs(j2 - j1), float(np.max(np.abs(m2 - m1))))
    if err > tol:
        raise QuadratureFailure(
            f"correction quadrature stuck at error {err:.3e} > {tol:.1e}"
        )
    # moment carries theta_i (a^{-1}theta)_j; the alternative ordering is the
    # transpose, identical for symmetric a up to quadrature noise
    gap = float(np.max(np.abs(m2 - m2.T)))
    return CorrectionValue(t=float(t), I=0.5 * (m2 + m2.T), J=float(j2), ordering_gap=gap)


def correction_I(field, t, ordering="standard", **kw) -> np.ndarray:
    """The matrix I(a)(t); ``ordering`` selects the published variant
    ("standard") or its transpose ("derivation"), equal for symmetric a."""
    if ordering not in ("standard", "derivation"):
        raise ValueError(f"unknown ordering {ordering!r}")
    cv = correction_pair(field, t, **kw)
    return cv.I.copy() if ordering == "standard" else cv.I.T.copy()


def correction_J(field, t, tol=1e-10, **kw) -> float:
    return correction_pair(field, t, tol=tol, **kw).J


def trace_identity_residual(field, t, **kw) -> float:
    """|J(a)(t) + a^{ij}(t) I_ij(a)(t) - 1|."""
    cv = correction_pair(field, t, **kw)
    a = eval_coeff(field, t)
    return abs(cv.J + float(np.sum(a * cv.I)) - 1.0)


# ---------------------------------------------------------------------------
# Pre-limit truncated surface integrals


def truncated_I(field, t, eps, panels=24, m_sphere=64) -> np.ndarray:
    """Surface integral over the lateral boundary of the parabolic ball:

        I^eps_ij = (1/2) int_0^{eps^2} int_{|y|=eps}
                   p(t, tau, y) (B_{t,tau} y)_i y_j / eps  dS(y) dtau,

    oriented so that it converges to correction_I as eps -> 0 at continuity
    points of a.  Graded in tau via tau = sigma^2.
    """
    n = field.n
    theta, w_s = sphere_rule(n, m_sphere)
    Y = eps * theta
    sigma, w_sig = _composite_gl(0.0, eps, panels)
    out = np.zeros((n, n))
    for s, w in zip(sigma, w_sig):
        tau = s * s
        if tau <= 0.0:
            continue
        pair = averaged_pair_cached(field, t, tau)
        pv = slice_values(field, t, tau, Y)
        by = Y @ pair.B
        # dS on the eps-sphere = eps^{n-1} dOmega
        surf = eps ** (n - 1)
        contrib = np.einsum("s,si,sj->ij", pv * w_s, by, Y) / eps * surf
        out += 0.5 * contrib * (2.0 * s) * w
    return out


def limit_consistency(field, t, epsilons, **kw) -> list[dict]:
    """Rows of (eps, I^eps, max-entry error vs the limiting I)."""
    eps_list = [float(e) for e in epsilons]
    if any(e <= 0 for e in eps_list) or sorted(eps_list, reverse=True) != eps_list:
        raise ValueError("epsilons must be positive and decreasing")
    cv = correction_pair(field, t)
    rows = []
    for e in eps_list:
        ie = truncated_I(field, t, e, **kw)
        rows.append({"epsilon": e, "I_eps": ie, "error": float(np.max(np.abs(ie - cv.I)))})
    return rows
