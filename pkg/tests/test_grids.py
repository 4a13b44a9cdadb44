import numpy as np
import pytest

from parakern.errors import PaddingTooSmall
from parakern.grids import (GridSpec, SampledField, export_csv, interior_mask,
                            load_field, save_field, second_diff,
                            spatial_hessian_entry, time_slice_values)


def test_grid_geometry():
    g = GridSpec.regular(2, (-4, 4), 33, time_window=(0, 2), nt=17, pad=0.5)
    assert g.shape == (17, 33, 33)
    assert g.axis(0)[0] == -4.0 and g.axis(0)[-1] == 4.0
    assert g.times[0] == 0.0 and g.times[-1] == 2.0
    assert g.cell == pytest.approx((8 / 32) ** 2)
    assert g.spatial.shape == (33, 33)
    assert g.nearest_space_index([0.11, -3.9]) == (16, 0)
    assert g.nearest_time_index(0.9) == 7


def test_binary_roundtrip(tmp_path):
    g = GridSpec.regular(1, (-2, 2), 17, time_window=(-1, 1), nt=9, pad=0.25)
    rng = np.random.default_rng(0)
    f = SampledField(grid=g, values=rng.standard_normal(g.shape),
                     compact_support=False)
    path = tmp_path / "field.pkf"
    save_field(path, f)
    back = load_field(path)
    assert back.grid == g
    assert np.array_equal(back.values, f.values)


def test_binary_roundtrip_spatial(tmp_path):
    g = GridSpec.regular(2, (-1, 1), 9, pad=0.1)
    f = SampledField(grid=g, values=np.arange(81, dtype=float).reshape(9, 9))
    save_field(tmp_path / "s.pkf", f)
    back = load_field(tmp_path / "s.pkf")
    assert back.grid == g and np.array_equal(back.values, f.values)


def test_csv_export(tmp_path):
    g = GridSpec.regular(1, (0, 1), 3, time_window=(0, 1), nt=2, pad=0.1)
    f = SampledField(grid=g, values=np.arange(6, dtype=float).reshape(2, 3),
                     compact_support=False)
    path = tmp_path / "f.csv"
    export_csv(path, f)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "t,x0,value"
    assert len(lines) == 7


def test_time_slice_cubic_exactness():
    # cubic-in-t data reproduced exactly between nodes
    g = GridSpec.regular(1, (0, 1), 4, time_window=(0, 3), nt=13, pad=0.1)
    ts = g.times
    vals = (ts**3 - 2 * ts**2 + ts)[:, None] * np.ones(4)[None, :]
    s = 1.234
    got = time_slice_values(g, vals, s)
    assert got[0] == pytest.approx(s**3 - 2 * s**2 + s, abs=1e-12)
    # zero extension far outside
    assert np.all(time_slice_values(g, vals, 99.0) == 0.0)


def test_fd_stencils():
    g = GridSpec.regular(2, (-1, 1), 41, pad=0.1)
    X, Y = g.space_meshgrid()
    vals = X**2 * Y + 3 * Y**2
    dxx = spatial_hessian_entry(vals, g, 0, 0)
    dxy = spatial_hessian_entry(vals, g, 0, 1)
    dyy = spatial_hessian_entry(vals, g, 1, 1)
    inner = (slice(2, -2), slice(2, -2))
    assert np.allclose(dxx[inner], 2 * Y[inner], atol=1e-10)
    assert np.allclose(dxy[inner], 2 * X[inner], atol=1e-10)
    assert np.allclose(dyy[inner], 6.0, atol=1e-9)


def test_padding_check():
    g = GridSpec.regular(1, (-1, 1), 21, pad=0.3)
    vals = np.ones(21)
    f = SampledField(grid=g, values=vals)
    with pytest.raises(PaddingTooSmall):
        f.require_padding()
    ok = SampledField(grid=g, values=np.where(np.abs(g.axis(0)) < 0.5, 1.0, 0.0))
    ok.require_padding()


def test_interior_mask():
    g = GridSpec.regular(1, (-1, 1), 21, time_window=(0, 1), nt=11, pad=0.1)
    m = interior_mask(g, margin_x=0.2, margin_t=0.2)
    assert not m[0].any() and not m[-1].any()
    assert not m[:, 0].any() and not m[:, -1].any()
    assert m[5, 10]


def test_field_validation_rejects_nan():
    g = GridSpec.regular(1, (0, 1), 4, pad=0.1)
    with pytest.raises(ValueError):
        SampledField(grid=g, values=np.array([0.0, np.nan, 0.0, 0.0]))
    with pytest.raises(ValueError):
        SampledField(grid=g, values=np.zeros(5))
