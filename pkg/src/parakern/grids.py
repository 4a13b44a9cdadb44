"""Space-time grids, sampled fields, and their disk formats.

A GridSpec describes a rectangular lattice: an optional uniform time axis and
n uniform space axes, plus a physical padding width ``pad``: the collar near
the space boundary that convolution results may pollute and inside which
compactly supported data must vanish.

SampledField binary layout (little-endian), used by save_field/load_field:

    magic    4 bytes  b"PKFB"
    version  uint32   1
    n        uint32   space dimension
    has_time uint32   0 or 1
    [if has_time] nt uint64, t0 float64, ht float64
    per axis:      nx uint64, x0 float64, hx float64
    pad      float64
    payload  float64 row-major, shape (nt, *nx) or (*nx)
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field as dc_field

import numpy as np

from .errors import PaddingTooSmall

_MAGIC = b"PKFB"


@dataclass(frozen=True)
class GridSpec:
    n: int
    x0: tuple
    hx: tuple
    nx: tuple
    t0: float | None = None
    ht: float | None = None
    nt: int | None = None
    pad: float = 1.0

    @staticmethod
    def regular(n, space_window, nx, time_window=None, nt=None, pad=1.0):
        """Uniform grid; space_window is (lo, hi) shared by all axes or a list
        of per-axis pairs.  Endpoints are included as nodes."""
        if isinstance(space_window[0], (int, float)):
            space_window = [tuple(space_window)] * n
        if len(space_window) != n:
            raise ValueError("need one window per space axis")
        if isinstance(nx, int):
            nx = (nx,) * n
        x0, hx = [], []
        for (lo, hi), m in zip(space_window, nx):
            x0.append(float(lo))
            hx.append((hi - lo) / (m - 1))
        t0 = ht = None
        if time_window is not None:
            t0 = float(time_window[0])
            ht = (time_window[1] - time_window[0]) / (nt - 1)
        return GridSpec(n=n, x0=tuple(x0), hx=tuple(hx), nx=tuple(nx),
                        t0=t0, ht=ht, nt=nt, pad=pad)

    @property
    def has_time(self):
        return self.t0 is not None

    @property
    def times(self):
        return self.t0 + self.ht * np.arange(self.nt)

    def axis(self, k):
        return self.x0[k] + self.hx[k] * np.arange(self.nx[k])

    @property
    def shape(self):
        return (self.nt, *self.nx) if self.has_time else tuple(self.nx)

    @property
    def cell(self):
        return float(np.prod(self.hx))

    @property
    def spatial(self):
        """The same grid without its time axis."""
        if not self.has_time:
            return self
        return GridSpec(n=self.n, x0=self.x0, hx=self.hx, nx=self.nx, pad=self.pad)

    def nearest_space_index(self, x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        idx = []
        for k in range(self.n):
            j = int(round((x[k] - self.x0[k]) / self.hx[k]))
            idx.append(min(max(j, 0), self.nx[k] - 1))
        return tuple(idx)

    def nearest_time_index(self, t):
        j = int(round((t - self.t0) / self.ht))
        return min(max(j, 0), self.nt - 1)

    def space_meshgrid(self):
        return np.meshgrid(*[self.axis(k) for k in range(self.n)], indexing="ij")


@dataclass
class SampledField:
    """Function samples on a grid; values shape (nt, *nx) or (*nx)."""

    grid: GridSpec
    values: np.ndarray
    smoothness: str = "C2"
    compact_support: bool = True

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.grid.shape:
            raise ValueError(
                f"values shape {self.values.shape} != grid shape {self.grid.shape}"
            )
        if not np.all(np.isfinite(self.values)):
            raise ValueError("field values must be finite")

    def time_slice(self, s):
        """Linear-in-time interpolation of the spatial slice at time s.

        Outside the time window the field is extended by zero (compact
        support in time)."""
        return time_slice_values(self.grid, self.values, s)

    def boundary_collar_max(self):
        """Largest |value| within the pad collar of the space boundary."""
        g = self.grid
        vals = np.abs(self.values)
        out = 0.0
        for k in range(g.n):
            w = max(int(np.ceil(g.pad / g.hx[k])), 1)
            ax = k + (1 if g.has_time else 0)
            sl_lo = [slice(None)] * vals.ndim
            sl_hi = [slice(None)] * vals.ndim
            sl_lo[ax] = slice(0, w)
            sl_hi[ax] = slice(-w, None)
            out = max(out, float(vals[tuple(sl_lo)].max(initial=0.0)),
                      float(vals[tuple(sl_hi)].max(initial=0.0)))
        return out

    def require_padding(self, tol=1e-8):
        leak = self.boundary_collar_max()
        if self.compact_support and leak > tol:
            raise PaddingTooSmall(
                f"support reaches the boundary collar (max {leak:.3g} > {tol:.3g})"
            )


def zeros_like_grid(grid: GridSpec) -> SampledField:
    return SampledField(grid=grid, values=np.zeros(grid.shape))


def time_slice_values(grid: GridSpec, values, s):
    """Four-point Lagrange (cubic) time slice of a raw (nt, *nx) array.

    Zero-extended outside the window; the O(ht^4) accuracy here matters
    because the tau integrals of singular kernels weight every slice by a
    log-divergent factor."""
    if not grid.has_time:
        return values
    pos = (s - grid.t0) / grid.ht
    if pos <= -2.0 or pos >= grid.nt + 1:
        return np.zeros(grid.nx)
    j = int(np.floor(pos))
    u = pos - j
    w = (
        -u * (u - 1.0) * (u - 2.0) / 6.0,
        (u + 1.0) * (u - 1.0) * (u - 2.0) / 2.0,
        -(u + 1.0) * u * (u - 2.0) / 2.0,
        (u + 1.0) * u * (u - 1.0) / 6.0,
    )
    out = np.zeros(grid.nx)
    for k, wk in enumerate(w, start=-1):
        row = j + k
        if wk != 0.0 and 0 <= row < grid.nt:
            out += wk * values[row]
    return out


# ---------------------------------------------------------------------------
# Finite differences (zero extension beyond the array; compactly supported
# data keeps the wrapped entries harmless)


def second_diff(values, h, axis):
    up = np.roll(values, -1, axis=axis)
    dn = np.roll(values, 1, axis=axis)
    return (up - 2.0 * values + dn) / h**2


def cross_diff(values, hi, hj, ax_i, ax_j):
    pp = np.roll(np.roll(values, -1, axis=ax_i), -1, axis=ax_j)
    mm = np.roll(np.roll(values, 1, axis=ax_i), 1, axis=ax_j)
    pm = np.roll(np.roll(values, -1, axis=ax_i), 1, axis=ax_j)
    mp = np.roll(np.roll(values, 1, axis=ax_i), -1, axis=ax_j)
    return (pp + mm - pm - mp) / (4.0 * hi * hj)


def spatial_hessian_entry(values, grid: GridSpec, i, j):
    """d_ij of a spatial array on the grid by central differences."""
    off = 1 if values.ndim == grid.n + 1 else 0
    if i == j:
        return second_diff(values, grid.hx[i], axis=i + off)
    return cross_diff(values, grid.hx[i], grid.hx[j], i + off, j + off)


def central_time_diff(values, ht):
    up = np.roll(values, -1, axis=0)
    dn = np.roll(values, 1, axis=0)
    return (up - dn) / (2.0 * ht)


def interior_mask(grid: GridSpec, margin_x, margin_t=None) -> np.ndarray:
    """Boolean mask of nodes at least margin_x from the space boundary and
    margin_t from the time boundary."""
    mask = np.ones(grid.shape, dtype=bool)
    if grid.has_time:
        mt = margin_x if margin_t is None else margin_t
        w = int(np.ceil(mt / grid.ht))
        if w > 0:
            mask[:w] = False
            mask[-w:] = False
    for k in range(grid.n):
        w = int(np.ceil(margin_x / grid.hx[k]))
        if w > 0:
            ax = k + (1 if grid.has_time else 0)
            sl = [slice(None)] * mask.ndim
            sl[ax] = slice(0, w)
            mask[tuple(sl)] = False
            sl[ax] = slice(mask.shape[ax] - w, None)
            mask[tuple(sl)] = False
    return mask


# ---------------------------------------------------------------------------
# Disk formats


def save_field(path, f: SampledField):
    g = f.grid
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<III", 1, g.n, 1 if g.has_time else 0))
        if g.has_time:
            fh.write(struct.pack("<Qdd", g.nt, g.t0, g.ht))
        for k in range(g.n):
            fh.write(struct.pack("<Qdd", g.nx[k], g.x0[k], g.hx[k]))
        fh.write(struct.pack("<d", g.pad))
        fh.write(np.ascontiguousarray(f.values, dtype="<f8").tobytes())


def load_field(path) -> SampledField:
    with open(path, "rb") as fh:
        if fh.read(4) != _MAGIC:
            raise ValueError("not a sampled-field file")
        version, n, has_time = struct.unpack("<III", fh.read(12))
        if version != 1:
            raise ValueError(f"unsupported version {version}")
        t0 = ht = nt = None
        if has_time:
            nt, t0, ht = struct.unpack("<Qdd", fh.read(24))
        x0, hx, nx = [], [], []
        for _ in range(n):
            m, lo, h = struct.unpack("<Qdd", fh.read(24))
            nx.append(int(m))
            x0.append(lo)
            hx.append(h)
        (pad,) = struct.unpack("<d", fh.read(8))
        grid = GridSpec(n=n, x0=tuple(x0), hx=tuple(hx), nx=tuple(nx),
                        t0=t0, ht=ht, nt=int(nt) if nt else None, pad=pad)
        payload = np.frombuffer(fh.read(), dtype="<f8").reshape(grid.shape)
    return SampledField(grid=grid, values=payload.copy())


def export_csv(path, f: SampledField):
    """Flat table: time (if any), space coordinates, value."""
    g = f.grid
    axes = [g.axis(k) for k in range(g.n)]
    cols = [f"x{k}" for k in range(g.n)]
    header = (["t"] if g.has_time else []) + cols + ["value"]
    mesh = np.meshgrid(*( [g.times] if g.has_time else [] ) + axes, indexing="ij")
    flat = [m.ravel() for m in mesh] + [f.values.ravel()]
    data = np.column_stack(flat)
    np.savetxt(path, data, delimiter=",", header=",".join(header), comments="")
