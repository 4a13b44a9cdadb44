"""Time-dependent coefficient matrices a(t) and their interval averages.

A coefficient field is a map t -> a(t) into symmetric n x n matrices with a
uniform two-sided ellipticity bound

    lam * |xi|^2  <=  <a(t) xi, xi>  <=  (1/lam) * |xi|^2 .

Only measurability in t is assumed, so discontinuous fields are first-class
citizens here.  Everything downstream is built from the running averages

    A(t, tau) = integral of a(r) over [t - tau, t]

and their inverses B = A^{-1}.  A inherits the ellipticity bracket scaled by
tau, so B is SPD with eigenvalues in [lam/tau, 1/(lam*tau)].

Integration policy: constant and piecewise-constant fields use exact interval
sums; smooth fields use adaptive Gauss-Legendre with absolute tolerance 1e-12.
Inverses always go through a Cholesky factorization of A (never cofactor
formulas), which keeps near-degenerate ellipticity stable.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass, field as dc_field

import numpy as np
import scipy.linalg as sla

from .errors import NonPositiveTau, SingularMatrix

FIELD_KINDS = ("constant", "smooth-periodic", "piecewise-constant", "random-piecewise")

_GL_NODES_16, _GL_WEIGHTS_16 = np.polynomial.legendre.leggauss(16)
_GL_NODES_32, _GL_WEIGHTS_32 = np.polynomial.legendre.leggauss(32)


@dataclass(frozen=True, eq=False)
class CoefficientField:
    """A concrete coefficient map t -> a(t).

    ``payload`` holds kind-specific data:

    * constant: {"matrix"}
    * smooth-periodic: {"base", "amplitude", "period"} with
      a(t) = base + amplitude * sin(2*pi*t/period)
    * piecewise-constant: {"breaks", "matrices"} with len(matrices) =
      len(breaks) + 1; matrices[k] applies on [breaks[k-1], breaks[k])
    * random-piecewise: same as piecewise-constant after seeded generation,
      plus the generating {"seed", "density", "window"}

    Equality is identity (eq=False) so fields can key memo caches.
    """

    n: int
    lam: float
    kind: str
    payload: dict

    def __post_init__(self):
        if self.kind not in FIELD_KINDS:
            raise ValueError(f"unknown field kind {self.kind!r}")
        if not (0.0 < self.lam <= 1.0):
            raise ValueError("ellipticity constant must lie in (0, 1]")


def _as_matrix(m, n):
    a = np.atleast_2d(np.asarray(m, dtype=float))
    if a.shape != (n, n):
        raise ValueError(f"expected {(n, n)} matrix, got {a.shape}")
    if not np.allclose(a, a.T, rtol=0.0, atol=1e-14):
        raise ValueError("coefficient matrix must be symmetric")
    return 0.5 * (a + a.T)


def _check_spectrum(mats, lam, slack=1e-9):
    for m in mats:
        w = np.linalg.eigvalsh(m)
        if w.min() < lam * (1 - slack) - slack or w.max() > (1 + slack) / lam + slack:
            raise ValueError(
                f"eigenvalues {w} escape the ellipticity bracket [{lam}, {1/lam}]"
            )


def constant_field(matrix, lam=None) -> CoefficientField:
    matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
    n = matrix.shape[0]
    m = _as_matrix(matrix, n)
    if lam is None:
        w = np.linalg.eigvalsh(m)
        lam = min(w.min(), 1.0 / w.max(), 1.0)
    _check_spectrum([m], lam)
    return CoefficientField(n=n, lam=float(lam), kind="constant", payload={"matrix": m})


def identity_field(n: int) -> CoefficientField:
    return constant_field(np.eye(n), lam=1.0)


def smooth_periodic_field(base, amplitude, period=2 * np.pi, lam=None) -> CoefficientField:
    base = np.atleast_2d(np.asarray(base, dtype=float))
    n = base.shape[0]
    b = _as_matrix(base, n)
    amp = _as_matrix(np.atleast_2d(np.asarray(amplitude, dtype=float)), n)
    if lam is None:
        # worst-case spectrum over a period, sampled densely
        ts = np.linspace(0.0, period, 257)
        lo = min(np.linalg.eigvalsh(b + amp * np.sin(2 * np.pi * t / period)).min() for t in ts)
        hi = max(np.linalg.eigvalsh(b + amp * np.sin(2 * np.pi * t / period)).max() for t in ts)
        lam = min(lo, 1.0 / hi, 1.0)
    fld = CoefficientField(
        n=n,
        lam=float(lam),
        kind="smooth-periodic",
        payload={"base": b, "amplitude": amp, "period": float(period)},
    )
    ts = np.linspace(0.0, period, 65)
    _check_spectrum([eval_coeff(fld, t) for t in ts], fld.lam, slack=1e-7)
    return fld


def piecewise_field(breaks, matrices, lam=None) -> CoefficientField:
    breaks = [float(b) for b in breaks]
    if sorted(breaks) != breaks:
        raise ValueError("breakpoints must be increasing")
    mats = [np.atleast_2d(np.asarray(m, dtype=float)) for m in matrices]
    if len(mats) != len(breaks) + 1:
        raise ValueError("need len(breaks) + 1 matrices")
    n = mats[0].shape[0]
    mats = [_as_matrix(m, n) for m in mats]
    if lam is None:
        lo = min(np.linalg.eigvalsh(m).min() for m in mats)
        hi = max(np.linalg.eigvalsh(m).max() for m in mats)
        lam = min(lo, 1.0 / hi, 1.0)
    _check_spectrum(mats, lam)
    return CoefficientField(
        n=n,
        lam=float(lam),
        kind="piecewise-constant",
        payload={"breaks": breaks, "matrices": mats},
    )


def random_piecewise_field(n, lam, seed, density=1.0, window=(-32.0, 32.0)) -> CoefficientField:
    """Seeded adversarial field: Poisson-like breakpoints, random SPD pieces.

    Pieces have eigenvalues log-uniform in [lam, 1/lam]; outside ``window``
    the edge matrices extend as constants, so a(t) is defined for all t.
    """
    rng = np.random.default_rng(seed)
    t0, t1 = window
    breaks = []
    t = t0
    while True:
        t = t + rng.exponential(1.0 / density)
        if t >= t1:
            break
        breaks.append(t)
    mats = []
    for _ in range(len(breaks) + 1):
        eigs = np.exp(rng.uniform(np.log(lam), np.log(1.0 / lam), size=n))
        q, r = np.linalg.qr(rng.standard_normal((n, n)))
        q = q * np.sign(np.diag(r))
        m = (q * eigs) @ q.T
        mats.append(0.5 * (m + m.T))
    _check_spectrum(mats, lam, slack=1e-9)
    return CoefficientField(
        n=n,
        lam=float(lam),
        kind="random-piecewise",
        payload={
            "breaks": breaks,
            "matrices": mats,
            "seed": seed,
            "density": density,
            "window": window,
        },
    )


def eval_coeff(field: CoefficientField, t: float) -> np.ndarray:
    """a(t) as a symmetric (n, n) array."""
    p = field.payload
    if field.kind == "constant":
        return p["matrix"].copy()
    if field.kind == "smooth-periodic":
        return p["base"] + p["amplitude"] * np.sin(2 * np.pi * t / p["period"])
    # piecewise kinds: matrices[k] on [breaks[k-1], breaks[k])
    k = bisect.bisect_right(p["breaks"], t)
    return p["matrices"][k].copy()


def breakpoints(field: CoefficientField):
    """Discontinuity locations of a(t) (empty for smooth kinds)."""
    if field.kind in ("piecewise-constant", "random-piecewise"):
        return list(field.payload["breaks"])
    return []


def _adaptive_gl(fun, a, b, tol, depth=0):
    """Entrywise adaptive Gauss-Legendre for matrix-valued integrands."""
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    x16 = mid + half * _GL_NODES_16
    x32 = mid + half * _GL_NODES_32
    v16 = np.tensordot(_GL_WEIGHTS_16, fun(x16), axes=(0, 0)) * half
    v32 = np.tensordot(_GL_WEIGHTS_32, fun(x32), axes=(0, 0)) * half
    err = np.max(np.abs(v32 - v16))
    if err <= tol or depth >= 24:
        return v32
    left = _adaptive_gl(fun, a, mid, 0.5 * tol, depth + 1)
    right = _adaptive_gl(fun, mid, b, 0.5 * tol, depth + 1)
    return left + right


def _piecewise_interval(breaks, matrices, a, b):
    """Exact integral of a piecewise-constant map over [a, b], a <= b."""
    total = np.zeros_like(matrices[0])
    edges = [a] + [x for x in breaks if a < x < b] + [b]
    for lo, hi in zip(edges[:-1], edges[1:]):
        k = bisect.bisect_right(breaks, 0.5 * (lo + hi))
        total = total + (hi - lo) * matrices[k]
    return total


def interval_integral(field: CoefficientField, a: float, b: float, tol=1e-12) -> np.ndarray:
    """Entrywise integral of a(r) over [a, b] (signed if b < a)."""
    if b < a:
        return -interval_integral(field, b, a, tol)
    if b == a:
        return np.zeros((field.n, field.n))
    p = field.payload
    if field.kind == "constant":
        return (b - a) * p["matrix"]
    if field.kind in ("piecewise-constant", "random-piecewise"):
        return _piecewise_interval(p["breaks"], p["matrices"], a, b)

    def fun(ts):
        s = np.sin(2 * np.pi * ts / p["period"])
        return p["base"][None, :, :] + s[:, None, None] * p["amplitude"][None, :, :]

    return _adaptive_gl(fun, a, b, tol)


@dataclass(frozen=True)
class AveragedPair:
    """A(t, tau), its inverse B, and the factorizations the kernel needs.

    chol_a and chol_b are lower-triangular Cholesky factors of A and B; B is
    only ever formed through triangular solves against chol_a (never cofactor
    formulas).  The quadratic form <B x, x> goes through |chol_a^{-1} x|^2
    for n >= 3; for the desk-scale dimensions the stored B entries are used
    directly (both routes agree to rounding, cross-checked in tests).
    """

    t: float
    tau: float
    A: np.ndarray
    B: np.ndarray
    det_b: float
    chol_b: np.ndarray
    chol_a: np.ndarray = dc_field(repr=False, default=None)
    lam_max: float = 0.0

    def quad_form_b(self, x):
        """<B x, x> for a single vector or a stack of row vectors."""
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        pts = np.atleast_2d(x)
        if self.B.shape[0] <= 2:
            q = np.sum((pts @ self.B) * pts, axis=1)
        else:
            y = sla.solve_triangular(self.chol_a, pts.T, lower=True)
            q = np.sum(y * y, axis=0)
        return float(q[0]) if single else q

    def quad_form_b_chol(self, x):
        """The triangular-solve route, kept for cross-checking."""
        pts = np.atleast_2d(np.asarray(x, dtype=float))
        y = sla.solve_triangular(self.chol_a, pts.T, lower=True)
        q = np.sum(y * y, axis=0)
        return float(q[0]) if x.ndim == 1 else q


def pair_from_matrix(A: np.ndarray, t: float, tau: float) -> AveragedPair:
    A = 0.5 * (A + A.T)
    try:
        chol_a = np.linalg.cholesky(A)
    except np.linalg.LinAlgError as exc:
        raise SingularMatrix(f"averaged matrix at (t={t}, tau={tau}) is not SPD") from exc
    eye = np.eye(A.shape[0])
    B = sla.cho_solve((chol_a, True), eye)
    B = 0.5 * (B + B.T)
    det_b = 1.0 / float(np.prod(np.diag(chol_a))) ** 2
    try:
        chol_b = np.linalg.cholesky(B)
    except np.linalg.LinAlgError as exc:
        raise SingularMatrix(f"inverse at (t={t}, tau={tau}) lost positivity") from exc
    if A.shape[0] == 1:
        lam_max = float(A[0, 0])
    else:
        lam_max = float(np.max(np.linalg.eigvalsh(A)))
    return AveragedPair(t=float(t), tau=float(tau), A=A, B=B, det_b=det_b,
                        chol_b=chol_b, chol_a=chol_a, lam_max=lam_max)


def averaged_matrix(field: CoefficientField, t: float, tau: float) -> AveragedPair:
    """A(t, tau) = integral of a over [t - tau, t], with inverse data."""
    if tau <= 0.0:
        raise NonPositiveTau(f"tau must be positive, got {tau}")
    A = interval_integral(field, t - tau, t)
    return pair_from_matrix(A, t, tau)


_PAIR_MEMO: dict = {}


def clear_pair_cache():
    """Reset the averaged-pair memo (runs start from a clean cache so their
    cumulative-sweep roundoff is independent of prior in-process work)."""
    _PAIR_MEMO.clear()


def averaged_pair_cached(field, t, tau) -> AveragedPair:
    """Memoized averaged_matrix; fields key by identity, so this is safe."""
    key = (field, float(t), float(tau))
    pair = _PAIR_MEMO.get(key)
    if pair is None:
        if len(_PAIR_MEMO) > 1 << 17:
            _PAIR_MEMO.clear()
        pair = averaged_matrix(field, t, tau)
        _PAIR_MEMO[key] = pair
    return pair


def warm_pair_cache(field, t, taus):
    """Fill the pair memo for one t and many taus with a single cumulative
    sweep over [t - max(tau), t] (one pass instead of one integral per tau).
    """
    taus = np.unique(np.asarray(taus, dtype=float))
    taus = taus[taus > 0.0]
    missing = [tau for tau in taus
               if (field, float(t), float(tau)) not in _PAIR_MEMO]
    if not missing:
        return
    for tau, A in zip(missing, averaged_prefix(field, t, missing)):
        _PAIR_MEMO[(field, float(t), float(tau))] = pair_from_matrix(A, t, tau)


def averaged_prefix(field: CoefficientField, t: float, taus) -> list[np.ndarray]:
    """A(t, tau_k) for an increasing list of taus, via cumulative sub-integrals.

    Each increment integrates a over [t - tau_{k+1}, t - tau_k] only, so the
    total work is one sweep over [t - max(tau), t].
    """
    taus = np.asarray(taus, dtype=float)
    if np.any(taus <= 0) or np.any(np.diff(taus) <= 0):
        raise NonPositiveTau("taus must be positive and strictly increasing")
    out = [interval_integral(field, t - taus[0], t)]
    for k in range(1, len(taus)):
        out.append(out[-1] + interval_integral(field, t - taus[k], t - taus[k - 1]))
    return out


def additivity_residual(field: CoefficientField, t: float, tau1: float, tau2: float) -> float:
    """Max-entry defect of A(t, tau1+tau2) = A(t-tau1, tau2) + A(t, tau1)."""
    if tau1 <= 0.0 or tau2 <= 0.0:
        raise NonPositiveTau("both taus must be positive")
    lhs = interval_integral(field, t - tau1 - tau2, t)
    rhs = interval_integral(field, t - tau1 - tau2, t - tau1) + interval_integral(
        field, t - tau1, t
    )
    return float(np.max(np.abs(lhs - rhs)))


def rayleigh_bounds(field: CoefficientField, t, tau, xi) -> float:
    """Rayleigh quotient <A xi, xi> / |xi|^2 of the averaged matrix."""
    pair = averaged_matrix(field, t, tau)
    xi = np.asarray(xi, dtype=float)
    return float(xi @ pair.A @ xi / (xi @ xi))
