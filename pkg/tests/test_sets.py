import numpy as np
import pytest
from hypothesis import given, strategies as st

from heatobs.errors import ConfigError, ScaleTooCoarse, ScaleTooFine
from heatobs.grid import make_grid
from heatobs.sets import (Ball, Box, Complement, FullSpace, Intersection, PeriodicPattern,
                          PeriodicStripes, Union, is_thick, rasterize, spec_from_dict,
                          thickness_profile, window_counts)


def brute_counts(values, w):
    """Independent oracle: explicit periodic window sums."""
    out = np.zeros(values.shape, dtype=np.int64)
    for idx in np.ndindex(values.shape):
        sl = np.ix_(*[(np.arange(w) + i) % m for i, m in zip(idx, values.shape)])
        out[idx] = values[sl].sum()
    return out


def test_stripes_half_thick():
    g = make_grid(1, 20, 1024)
    rep = thickness_profile(rasterize(PeriodicStripes(0, 0.5, 1.0), g), 1.0)
    assert abs(rep.gamma_min - 0.5) <= rep.gamma_uncertainty


def test_ball_not_thick():
    g = make_grid(1, 40, 2048)
    assert thickness_profile(rasterize(Ball((0.0,), 1.0), g), 2.0).gamma_min == 0.0


def test_ball_2d_not_thick():
    g = make_grid(2, 40, 128)
    assert thickness_profile(rasterize(Ball((0.0, 0.0), 1.0), g), 2.0).gamma_min == 0.0


@given(st.integers(0, 2 ** 31), st.sampled_from([(1, 64, 5), (2, 16, 3), (2, 12, 7), (3, 6, 2)]),
       st.floats(0.05, 0.95))
def test_window_counts_match_brute_force(seed, dims, p):
    n, M, w = dims
    vals = np.random.default_rng(seed).random((M,) * n) < p
    assert np.array_equal(window_counts(vals, w), brute_counts(vals, w))


def test_thickness_brute_force_on_64():
    g = make_grid(2, 8, 64)
    spec = Union((PeriodicStripes(0, 0.3, 1.0), Ball((1.0, 1.0), 2.0)))
    mask = rasterize(spec, g)
    for L in (0.5, 1.0, 2.0):
        rep = thickness_profile(mask, L)
        w = rep.window_cells
        ref = brute_counts(mask.values, w).min() * g.cell_volume / L ** 2
        assert rep.gamma_min == min(ref, 1.0)


def test_scale_errors():
    g = make_grid(1, 10, 64)
    m = rasterize(FullSpace(), g)
    with pytest.raises(ScaleTooFine):
        thickness_profile(m, 0.1)
    with pytest.raises(ScaleTooCoarse):
        thickness_profile(m, 11.0)


def test_full_space_and_empty():
    g = make_grid(2, 4, 16)
    full = rasterize(FullSpace(), g)
    assert thickness_profile(full, 1.0).gamma_min == 1.0
    assert full.complement().is_empty()
    assert is_thick(full, 1.0, 2.0)


def test_set_algebra_on_masks():
    g = make_grid(2, 8, 32)
    a = rasterize(Ball((0.0, 0.0), 2.0), g)
    b = rasterize(Box((-1.0, -1.0), (3.0, 3.0)), g)
    assert rasterize(Intersection((Ball((0.0, 0.0), 2.0), Box((-1.0, -1.0), (3.0, 3.0)))), g) == (a & b)
    assert rasterize(Union((Ball((0.0, 0.0), 2.0), Box((-1.0, -1.0), (3.0, 3.0)))), g) == (a | b)
    assert rasterize(Complement(Ball((0.0, 0.0), 2.0)), g) == a.complement()


def test_pattern_is_periodic():
    g = make_grid(1, 8, 256)
    m = rasterize(PeriodicPattern(Box((0.0,), (0.25,)), 1.0), g)
    assert thickness_profile(m, 1.0).gamma_min == pytest.approx(0.25, abs=2 * g.spacing)


@pytest.mark.parametrize("spec", [
    PeriodicStripes(1, 0.4, 1.5, 0.2),
    Union((Ball((0.0, 1.0), 2.0), Complement(Box((0.0, 0.0), (1.0, 2.0))))),
    PeriodicPattern(Ball((0.5, 0.5), 0.3), 1.0),
])
def test_spec_dict_round_trip(spec):
    assert spec_from_dict(spec.to_dict()) == spec


def test_spec_from_dict_names_field():
    with pytest.raises(ConfigError, match="radius"):
        spec_from_dict({"kind": "ball", "center": [0], "radius": -1})
    with pytest.raises(ConfigError, match="colour"):
        spec_from_dict({"kind": "stripes", "colour": 1})
    with pytest.raises(ConfigError, match=r"parts\[1\]"):
        spec_from_dict({"kind": "union", "parts": [{"kind": "full"}, {"kind": "blob"}]})
