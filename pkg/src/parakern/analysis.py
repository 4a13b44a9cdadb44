"""Parabolic metric geometry, weights, maximal functions, and mixed norms.

The parabolic metric space is R^{n+1} with the quasi-distance

    rho((t, x), (s, y)) = max(|t - s|^{1/2}, |x - y|)

and Lebesgue measure; parabolic balls have measure ~ r^{n+2}, so the space is
doubling.  On top of it live the Muckenhoupt classes (the parabolic class for
space-time weights, the classical ones on R and R^n), the maximal and sharp
maximal functions, mixed norms L^q(nu; L^p(omega)) with an optional Holder
seminorm as the inner norm, weighted distribution functions for weak-type
estimates, and reverse-Holder probes.

Discrete conventions (documented surrogates):

* ball averages are plain means over lattice nodes inside the ball; essential
  infima are minima over the same nodes;
* power weights rho(., origin)^gamma are evaluated with the distance floored
  at a fraction of the lattice spacing, so the origin node stays finite while
  in-class averages converge and out-of-class averages blow up under the
  gamma sweeps that the experiments run;
* sup-type quantities are taken over seeded ball/pair samples with a fixed
  reduction order, hence reproducible for a fixed seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from .errors import (DimensionMismatch, NonIntegrableWeight, RadiusBelowGrid)
from .grids import GridSpec, SampledField

_HOM_DIM = {"time": lambda n: 1, "space": lambda n: n, "spacetime": lambda n: n + 2}


def parabolic_distance(p1, p2) -> float:
    """max(|t - s|^{1/2}, |x - y|) between space-time points (t, x)."""
    t1, x1 = p1[0], np.atleast_1d(np.asarray(p1[1], dtype=float))
    t2, x2 = p2[0], np.atleast_1d(np.asarray(p2[1], dtype=float))
    if x1.shape != x2.shape:
        raise DimensionMismatch(f"space dims {x1.shape} vs {x2.shape}")
    return float(max(np.sqrt(abs(t1 - t2)), np.linalg.norm(x1 - x2)))


# ---------------------------------------------------------------------------
# Weights


@dataclass(frozen=True)
class WeightSpec:
    """A weight on space-time, space, or the time line.

    form "power": w = rho(., origin)^gamma in the domain's natural metric
    (parabolic for space-time, Euclidean distance to 0 otherwise).
    form "tensor": product nu(t) * omega(x) of a time and a space weight.
    form "sampled": positive samples on a grid.
    """

    domain: str
    form: str
    gamma: float = 0.0
    nu: "WeightSpec | None" = None
    omega: "WeightSpec | None" = None
    samples: SampledField | None = None

    def __post_init__(self):
        if self.domain not in ("spacetime", "space", "time"):
            raise ValueError(f"unknown weight domain {self.domain!r}")
        if self.form not in ("power", "tensor", "sampled"):
            raise ValueError(f"unknown weight form {self.form!r}")
        if self.form == "tensor" and (self.nu is None or self.omega is None):
            raise ValueError("tensor weights need both factors")
        if self.form == "sampled":
            if self.samples is None:
                raise ValueError("sampled weights need samples")
            if np.any(self.samples.values <= 0.0):
                raise ValueError("weights must be strictly positive")


def constant_weight(domain="spacetime") -> WeightSpec:
    return WeightSpec(domain=domain, form="power", gamma=0.0)


def power_weight(domain, gamma) -> WeightSpec:
    return WeightSpec(domain=domain, form="power", gamma=float(gamma))


def tensor_weight(nu: WeightSpec, omega: WeightSpec) -> WeightSpec:
    return WeightSpec(domain="spacetime", form="tensor", nu=nu, omega=omega)


def hom_dimension(domain, n) -> int:
    """Homogeneous dimension governing local integrability of power weights."""
    return _HOM_DIM[domain](n)


def power_weight_in_class(domain, n, gamma, p) -> bool:
    """Membership of rho^gamma in A_p of the domain (standard thresholds,
    re-verified empirically by the blow-up sweeps in the experiments)."""
    hom = hom_dimension(domain, n)
    if p == 1:
        return -hom < gamma <= 0
    return -hom < gamma < hom * (p - 1)


def weight_at(w: WeightSpec, ts, pts, floor=0.0):
    """Evaluate w at times ts (m,) and spatial points pts (m, n).

    Distances to the origin are floored at ``floor`` (a fraction of the
    lattice spacing in callers) so power singularities stay finite on nodes.
    """
    ts = np.asarray(ts, dtype=float)
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    if w.form == "tensor":
        return weight_at(w.nu, ts, pts, floor) * weight_at(w.omega, ts, pts, floor)
    if w.form == "sampled":
        from .operators import sample_spacetime

        g = w.samples.grid
        if g.has_time:
            return np.array([
                sample_spacetime(w.samples, t, p[None, :])[0]
                for t, p in zip(np.broadcast_to(ts, (len(pts),)), pts)
            ])
        return sample_spacetime(w.samples, 0.0, pts)
    # power form
    if w.domain == "time":
        rho = np.abs(ts)
    elif w.domain == "space":
        rho = np.linalg.norm(pts, axis=-1)
    else:
        rho = np.maximum(np.sqrt(np.abs(ts)), np.linalg.norm(pts, axis=-1))
    rho = np.maximum(rho, floor)
    return rho**w.gamma


def weight_on_grid(w: WeightSpec, grid: GridSpec, floor=None):
    """Weight values on all nodes of a grid (shape = grid.shape)."""
    if floor is None:
        floor = 0.25 * min(grid.hx) if grid.n else 0.25 * grid.ht
    if grid.has_time:
        mesh = np.meshgrid(grid.times, *[grid.axis(k) for k in range(grid.n)],
                           indexing="ij")
        ts = mesh[0].ravel()
        pts = np.stack([m.ravel() for m in mesh[1:]], axis=1)
    else:
        mesh = grid.space_meshgrid()
        pts = np.stack([m.ravel() for m in mesh], axis=1)
        ts = np.zeros(pts.shape[0])
    return weight_at(w, ts, pts, floor=floor).reshape(grid.shape)


# ---------------------------------------------------------------------------
# Ball sampling


@dataclass(frozen=True)
class BallSampler:
    """Deterministic sampler of metric balls in a window.

    Centers walk a coarsened lattice; radii are dyadic from ``r_min`` to a
    quarter of the window, capped at ``max_balls`` balls.  Averages use a
    fixed local lattice per ball (``resolution`` nodes per axis).
    """

    window: tuple = (-4.0, 4.0)
    r_min: float = 0.0625
    centers: int = 9
    max_balls: int = 2048
    resolution: int = 9
    seed: int = 0

    def radii(self):
        lo, hi = self.window
        r, out = self.r_min, []
        while r <= (hi - lo) / 4.0:
            out.append(r)
            r *= 2.0
        return out or [self.r_min]


def _ball_lattice(domain, n, center, radius, resolution):
    """Nodes of a local lattice covering the ball, with the ball mask applied.

    Returns (ts, pts) arrays.  Time extent is radius^2 for parabolic balls.
    """
    m = resolution
    if domain == "time":
        ts = center[0] + np.linspace(-radius, radius, 4 * m)
        return ts, np.zeros((len(ts), max(n, 1)))
    axes = [np.linspace(c - radius, c + radius, m) for c in center[1]]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([g.ravel() for g in mesh], axis=1)
    keep = np.linalg.norm(pts - np.asarray(center[1]), axis=1) <= radius
    pts = pts[keep]
    if domain == "space":
        return np.zeros(pts.shape[0]), pts
    ts = center[0] + np.linspace(-radius**2, radius**2, m)
    TS = np.repeat(ts, pts.shape[0])
    PTS = np.tile(pts, (m, 1))
    return TS, PTS


def iter_balls(sampler: BallSampler, domain, n):
    lo, hi = sampler.window
    cs = np.linspace(lo, hi, sampler.centers)
    count = 0
    for r in sampler.radii():
        if domain == "time":
            centers = [(c, np.zeros(max(n, 1))) for c in cs]
        elif domain == "space":
            mesh = np.meshgrid(*([cs] * n), indexing="ij")
            centers = [(0.0, np.array(p)) for p in zip(*[m.ravel() for m in mesh])]
        else:
            mesh = np.meshgrid(*([cs] * (n + 1)), indexing="ij")
            centers = [(p[0], np.array(p[1:])) for p in zip(*[m.ravel() for m in mesh])]
        for c in centers:
            if count >= sampler.max_balls:
                return
            count += 1
            yield c, r


def muckenhoupt_constant(w: WeightSpec, p, sampler: BallSampler, n=1) -> dict:
    """sup over sampled balls of the A_p product
    (avg w) (avg w^{1/(1-p)})^{p-1}, or (avg w)/(inf w) for p = 1.

    Raises NonIntegrableWeight when a power weight (or its dual power) fails
    local integrability analytically.
    """
    if p < 1:
        raise ValueError("p must be >= 1")
    _check_power_integrability(w, p, n)
    sup, used = 0.0, 0
    for center, r in iter_balls(sampler, w.domain, n):
        ts, pts = _ball_lattice(w.domain, n, center, r, sampler.resolution)
        floor = 0.5 * r / sampler.resolution
        vals = weight_at(w, ts, pts, floor=floor)
        avg = float(np.mean(vals))
        if p == 1:
            quot = avg / float(np.min(vals))
        else:
            dual = float(np.mean(vals ** (1.0 / (1.0 - p))))
            quot = avg * dual ** (p - 1.0)
        if not np.isfinite(quot):
            raise NonIntegrableWeight("ball average overflowed")
        sup = max(sup, quot)
        used += 1
    return {"constant": sup, "balls": used}


def _check_power_integrability(w: WeightSpec, p, n):
    if w.form == "power":
        hom = hom_dimension(w.domain, n if w.domain != "time" else 1)
        if w.gamma <= -hom:
            raise NonIntegrableWeight(
                f"power weight gamma={w.gamma} <= -{hom} is not locally integrable"
            )
        if p > 1 and w.gamma / (1.0 - p) <= -hom:
            raise NonIntegrableWeight(
                f"dual power gamma'={w.gamma/(1.0-p):.3g} <= -{hom}"
            )
    elif w.form == "tensor":
        _check_power_integrability(w.nu, p, 1)
        _check_power_integrability(w.omega, p, n)


# ---------------------------------------------------------------------------
# Maximal functions on sampled fields


def _grid_ball_mask(grid: GridSpec, point, r):
    t0, x0 = point[0], np.atleast_1d(np.asarray(point[1], dtype=float))
    mesh = np.meshgrid(grid.times, *[grid.axis(k) for k in range(grid.n)],
                       indexing="ij")
    mask = np.abs(mesh[0] - t0) < r**2
    dist2 = sum((mesh[1 + k] - x0[k]) ** 2 for k in range(grid.n))
    return mask & (dist2 < r**2)


def parabolic_maximal(f: SampledField, point, radii) -> float:
    """max over the given radii of the average of |f| over the discrete
    parabolic ball centered at the point."""
    grid = f.grid
    best = 0.0
    for r in radii:
        if r <= 0 or r < max(grid.hx) or r * r < grid.ht:
            raise RadiusBelowGrid(f"radius {r} unresolvable on the grid")
        mask = _grid_ball_mask(grid, point, r)
        if not mask.any():
            raise RadiusBelowGrid(f"radius {r} captures no node")
        best = max(best, float(np.mean(np.abs(f.values[mask]))))
    return best


def holder_seminorm(phi: SampledField, alpha, seed=0, pair_cap=10**6,
                    per_class=4096) -> float:
    """Discrete [phi]_{C^alpha}: max over node pairs of |dphi| / |dx|^alpha.

    All pairs when their count fits under pair_cap (always in 1-D at desk
    scale); otherwise a seeded sample stratified by dyadic pair distance,
    where the sup quotient concentrates.
    """
    if not (0.0 < alpha < 1.0):
        raise ValueError("alpha must lie in (0, 1)")
    grid = phi.grid
    vals = phi.values
    if grid.n == 1:
        x = grid.axis(0)
        m = len(x)
        if m * m <= pair_cap:
            dv = np.abs(vals[:, None] - vals[None, :])
            dx = np.abs(x[:, None] - x[None, :])
            iu = np.triu_indices(m, k=1)
            return float(np.max(dv[iu] / dx[iu] ** alpha))
    rng = np.random.default_rng(seed)
    mesh = grid.space_meshgrid()
    pts = np.stack([g.ravel() for g in mesh], axis=1)
    flat = vals.ravel()
    h = min(grid.hx)
    diam = np.linalg.norm([g.hx[k] * (g.nx[k] - 1) for g, k in
                           [(grid, k) for k in range(grid.n)]])
    best = 0.0
    scale = h
    while scale <= diam:
        i = rng.integers(0, len(flat), size=per_class)
        direction = rng.standard_normal((per_class, grid.n))
        direction /= np.linalg.norm(direction, axis=1, keepdims=True)
        target = pts[i] + direction * rng.uniform(scale, 2 * scale,
                                                  size=(per_class, 1))
        idx = []
        for k in range(grid.n):
            j = np.clip(np.round((target[:, k] - grid.x0[k]) / grid.hx[k]),
                        0, grid.nx[k] - 1).astype(int)
            idx.append(j)
        j_flat = np.ravel_multi_index(tuple(idx), grid.nx)
        d = np.linalg.norm(pts[i] - pts[j_flat], axis=1)
        keep = d > 0
        if keep.any():
            q = np.abs(flat[i][keep] - flat[j_flat][keep]) / d[keep] ** alpha
            best = max(best, float(np.max(q)))
        scale *= 2.0
    return best


@dataclass(frozen=True)
class MixedNormSpec:
    """Outer L^q(nu) in time of an inner spatial norm: L^p(omega), sup when
    p = inf, or the C^alpha seminorm when alpha is set."""

    q: float
    p: float = 2.0
    nu: WeightSpec | None = None
    omega: WeightSpec | None = None
    alpha: float | None = None

    def __post_init__(self):
        if not (1.0 <= self.q):
            raise ValueError("q must be >= 1")
        if self.alpha is None and not (1.0 <= self.p):
            raise ValueError("p must be >= 1")
        if self.alpha is not None and not (0.0 < self.alpha < 1.0):
            raise ValueError("alpha must lie in (0, 1)")


def _inner_norm(slice_vals, grid_sp: GridSpec, spec: MixedNormSpec, omega_vals,
                seed=0):
    if spec.alpha is not None:
        phi = SampledField(grid=grid_sp, values=slice_vals, compact_support=False)
        return holder_seminorm(phi, spec.alpha, seed=seed)
    v = np.abs(slice_vals)
    if np.isinf(spec.p):
        return float(v.max(initial=0.0))
    wv = omega_vals if omega_vals is not None else 1.0
    return float((np.sum(v**spec.p * wv) * grid_sp.cell) ** (1.0 / spec.p))


def mixed_norm(f: SampledField, spec: MixedNormSpec) -> float:
    """Discrete ||  t -> || f(t,.) ||_inner  ||_{L^q(nu)}."""
    grid = f.grid
    gsp = grid.spatial
    omega_vals = None
    if spec.omega is not None and spec.alpha is None:
        omega_vals = weight_on_grid(spec.omega, gsp)
    inner = np.array([
        _inner_norm(f.values[it], gsp, spec, omega_vals)
        for it in range(grid.nt)
    ])
    nu_vals = np.ones(grid.nt)
    if spec.nu is not None:
        nu_vals = weight_at(spec.nu, grid.times, np.zeros((grid.nt, grid.n)),
                            floor=0.25 * grid.ht)
    if np.isinf(spec.q):
        return float(inner.max(initial=0.0))
    return float((np.sum(inner**spec.q * nu_vals) * grid.ht) ** (1.0 / spec.q))


def sharp_maximal(g: SampledField, point, inner_norm="abs", p=2.0,
                  omega: WeightSpec | None = None, alpha=0.5,
                  radii=None, center_stride=2) -> float:
    """Sharp maximal function at a point: sup over sampled balls containing it
    of the mean oscillation avg_B || g - g_B ||_F.

    inner_norm "abs" uses parabolic space-time balls and scalar averages
    (BMO of a function on the parabolic space); "Lp_omega" and "Calpha" use
    time intervals as balls with the spatial norm as F (vector-valued BMO on
    the line).
    """
    grid = g.grid
    if radii is None:
        rmax = (grid.times[-1] - grid.t0) / 2.0
        radii, r = [], 2 * max(max(grid.hx), np.sqrt(grid.ht))
        while r <= rmax:
            radii.append(r)
            r *= 2.0
    t0 = point[0]
    best = 0.0
    if inner_norm == "abs":
        for r in radii:
            for c_t in _centers_near(grid.times, t0, r**2, center_stride):
                for c_x in _space_centers_near(grid, point[1], r, center_stride):
                    mask = _grid_ball_mask(grid, (c_t, c_x), r)
                    if not mask.any() or not mask[grid.nearest_time_index(t0)][
                            tuple(np.array(grid.nearest_space_index(point[1])))]:
                        continue
                    vals = g.values[mask]
                    best = max(best, float(np.mean(np.abs(vals - vals.mean()))))
        return best
    gsp = grid.spatial
    omega_vals = None
    spec = None
    if inner_norm == "Lp_omega":
        spec = MixedNormSpec(q=1.0, p=p, omega=omega)
        if omega is not None:
            omega_vals = weight_on_grid(omega, gsp)
    elif inner_norm == "Calpha":
        spec = MixedNormSpec(q=1.0, alpha=alpha)
    else:
        raise ValueError(f"unknown inner norm {inner_norm!r}")
    times = grid.times
    for r in radii:
        for c_t in _centers_near(times, t0, r, center_stride):
            sel = np.abs(times - c_t) < r
            if not sel.any() or not sel[grid.nearest_time_index(t0)]:
                continue
            block = g.values[sel]
            g_ball = block.mean(axis=0)
            osc = np.array([
                _inner_norm(row - g_ball, gsp, spec, omega_vals)
                for row in block
            ])
            best = max(best, float(osc.mean()))
    return best


def _centers_near(axis_vals, t0, r, stride):
    sel = np.abs(axis_vals - t0) < r
    idx = np.flatnonzero(sel)[::stride]
    return axis_vals[idx]


def _space_centers_near(grid, x0, r, stride):
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    axes = []
    for k in range(grid.n):
        ax = grid.axis(k)
        sel = np.abs(ax - x0[k]) < r
        axes.append(ax[np.flatnonzero(sel)[::stride]])
    mesh = np.meshgrid(*axes, indexing="ij")
    return [np.array(p) for p in zip(*[m.ravel() for m in mesh])]


def distribution_weighted(g: SampledField, lam, w: WeightSpec,
                          level_norm="abs", p=2.0,
                          omega: WeightSpec | None = None, alpha=0.5) -> float:
    """Weighted measure of the super-level set at height lam.

    "abs": w({(t,x): |g| > lam}) over space-time nodes.  "Lp_omega"/"Calpha":
    nu({t: ||g(t,.)||_F > lam}) over time slices, with w the time weight.
    """
    if lam <= 0:
        raise ValueError("lambda must be positive")
    grid = g.grid
    if level_norm == "abs":
        wv = weight_on_grid(w, grid)
        mask = np.abs(g.values) > lam
        return float(np.sum(wv[mask]) * grid.cell * grid.ht)
    gsp = grid.spatial
    omega_vals = None
    if level_norm == "Lp_omega":
        spec = MixedNormSpec(q=1.0, p=p, omega=omega)
        if omega is not None:
            omega_vals = weight_on_grid(omega, gsp)
    elif level_norm == "Calpha":
        spec = MixedNormSpec(q=1.0, alpha=alpha)
    else:
        raise ValueError(f"unknown level norm {level_norm!r}")
    inner = np.array([
        _inner_norm(g.values[it], gsp, spec, omega_vals) for it in range(grid.nt)
    ])
    nu_vals = weight_at(w, grid.times, np.zeros((grid.nt, max(grid.n, 1))),
                        floor=0.25 * grid.ht)
    return float(np.sum(nu_vals[inner > lam]) * grid.ht)


# ---------------------------------------------------------------------------
# Reverse Holder probes


def reverse_holder_probe(w: WeightSpec, r, sampler: BallSampler, n=1) -> float:
    """sup over sampled balls of (avg (w^{-1})^r)^{1/r} / inf_B w^{-1}.

    Finite uniformly in the sample for r below the reverse-Holder exponent of
    w^{-1}; blows up under lattice refinement past it.
    """
    if r <= 1.0:
        raise ValueError("r must exceed 1")
    inv = _inverse_weight(w)
    _check_power_integrability_pow(inv, r, n)
    sup = 0.0
    for center, rad in iter_balls(sampler, inv.domain, n):
        ts, pts = _ball_lattice(inv.domain, n, center, rad, sampler.resolution)
        floor = 0.5 * rad / sampler.resolution
        vals = weight_at(inv, ts, pts, floor=floor)
        quot = float(np.mean(vals**r) ** (1.0 / r) / np.min(vals))
        if not np.isfinite(quot):
            raise NonIntegrableWeight("reverse-Holder average overflowed")
        sup = max(sup, quot)
    return sup


def _inverse_weight(w: WeightSpec) -> WeightSpec:
    if w.form == "power":
        return WeightSpec(domain=w.domain, form="power", gamma=-w.gamma)
    if w.form == "tensor":
        return tensor_weight(_inverse_weight(w.nu), _inverse_weight(w.omega))
    inv = SampledField(grid=w.samples.grid, values=1.0 / w.samples.values,
                       compact_support=False)
    return WeightSpec(domain=w.domain, form="sampled", samples=inv)


def _check_power_integrability_pow(w: WeightSpec, r, n):
    if w.form == "power":
        hom = hom_dimension(w.domain, n if w.domain != "time" else 1)
        if w.gamma * r <= -hom:
            raise NonIntegrableWeight(
                f"(w^-1)^r with exponent {w.gamma * r:.3g} <= -{hom}"
            )


def reverse_holder_critical(w: WeightSpec, sampler: BallSampler, n=1,
                            r_hi=8.0, steps=12, growth_cut=1.25) -> dict:
    """Bisection bracket for the largest r with a stable reverse-Holder probe.

    Divergence is detected by growth of the probe under doubling the local
    lattice resolution (a diverging average keeps climbing as nodes approach
    the singular set)."""
    fine = BallSampler(window=sampler.window, r_min=sampler.r_min,
                       centers=sampler.centers, max_balls=sampler.max_balls,
                       resolution=2 * sampler.resolution + 1, seed=sampler.seed)

    def divergent(r):
        try:
            a = reverse_holder_probe(w, r, sampler, n)
            b = reverse_holder_probe(w, r, fine, n)
        except NonIntegrableWeight:
            return True
        return b > growth_cut * a

    lo, hi = 1.0 + 1e-6, r_hi
    if not divergent(hi):
        return {"critical_low": hi, "critical_high": float("inf")}
    for _ in range(steps):
        mid = 0.5 * (lo + hi)
        if divergent(mid):
            hi = mid
        else:
            lo = mid
    return {"critical_low": lo, "critical_high": hi}


# ---------------------------------------------------------------------------
# Catalogue used by the experiments


def weight_catalogue(n) -> list[dict]:
    """Labeled power weights with their analytic class membership."""
    out = []
    for domain in ("spacetime", "space", "time"):
        hom = hom_dimension(domain, n)
        for p in (1.0, 2.0, 3.0):
            gammas = {
                "mid": 0.0 if p == 1.0 else 0.5 * hom * (p - 1) - 0.25 * hom,
                "near_lower": -hom * 0.9,
                "out_low": -hom * 1.0,
            }
            for label, gamma in gammas.items():
                out.append({
                    "domain": domain,
                    "p": p,
                    "gamma": gamma,
                    "label": f"{domain}-p{p}-{label}",
                    "in_class": power_weight_in_class(domain, n, gamma, p),
                    "weight": power_weight(domain, gamma),
                })
    return out
