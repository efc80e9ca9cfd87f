import math

import numpy as np
import pytest

from heatobs.errors import (EmptyObservationSet, InvalidLambda, ObservationVanishes, TooFewNodes,
                            ZeroInput)
from heatobs.grid import GridFunction, make_grid
from heatobs.observability import (TimeWindowSet, interpolation_constant, obs_constant_estimate,
                                   obs_forms, predicted_cobs, restrict_quadrature,
                                   telescope_schedule, time_quadrature)
from heatobs.sets import Ball, FullSpace, IndicatorMask, PeriodicStripes, rasterize
from heatobs.spectral import random_bandlimited

from oracles import dense_obs_constant


@pytest.mark.parametrize("scheme", ["trapezoid", "log-refined"])
def test_quadrature_weights_sum_to_T(scheme):
    q = time_quadrature(2.5, scheme, K=17)
    assert q.weights.sum() == pytest.approx(2.5, rel=1e-14)
    assert q.nodes[-1] == 2.5 and q.nodes[0] > 0
    assert np.all(np.diff(q.nodes) > 0)


def test_quadrature_errors():
    with pytest.raises(TooFewNodes):
        time_quadrature(1.0, K=1)
    q = time_quadrature(1.0, K=8)
    with pytest.raises(TooFewNodes):
        restrict_quadrature(q, TimeWindowSet(((0.01, 0.05),)))


def test_restricted_quadrature():
    q = restrict_quadrature(time_quadrature(1.0, K=10), TimeWindowSet(((0.25, 0.55), (0.75, 0.95))))
    assert np.allclose(q.nodes, [0.3, 0.4, 0.5, 0.8, 0.9])


def test_trapezoid_integrates_exponential():
    q = time_quadrature(1.0, K=512)
    assert q.integrate(np.exp(-q.nodes)) == pytest.approx(1 - math.exp(-1), rel=5e-3)


@pytest.mark.parametrize("M,T", [(32, 1.0), (1024, 1.0), (64, 0.5), (64, 2.0)])
def test_full_mask_gives_inverse_T(M, T):
    g = make_grid(1, 8 if M < 1024 else 20, M)
    est = obs_constant_estimate(rasterize(FullSpace(), g), T)
    assert est.value == pytest.approx(1 / T, rel=1e-6)


# masks are at least two cells wide; one-cell stripes give B an exact grid null space
@pytest.mark.parametrize("side,width,phase,T", [(8, 0.5, 0.0, 1.0), (8, 0.5, 0.25, 0.5),
                                                (8, 0.5, 0.0, 2.0), (4, 0.25, 0.0, 1.0)])
def test_matches_dense_oracle(side, width, phase, T):
    g = make_grid(1, side, 32)
    mask = rasterize(PeriodicStripes(0, width, 1.0, phase), g)
    q = time_quadrature(T)
    est = obs_constant_estimate(mask, T, quad=q)
    assert est.value == pytest.approx(dense_obs_constant(mask, T, q), rel=1e-6)
    assert est.flags == ()


@pytest.mark.parametrize("T", [0.5, 1.0])
def test_matches_dense_oracle_2d(T):
    g = make_grid(2, 4, 16)
    mask = rasterize(PeriodicStripes(1, 0.5, 1.0), g)
    q = time_quadrature(T, K=16)
    est = obs_constant_estimate(mask, T, quad=q)
    assert est.value == pytest.approx(dense_obs_constant(mask, T, q), rel=1e-6)


def test_monotone_in_mask_inclusion():
    g = make_grid(1, 8, 64)
    small = rasterize(PeriodicStripes(0, 0.25, 1.0), g)
    mid = rasterize(PeriodicStripes(0, 0.5, 1.0), g)
    big = mid | rasterize(Ball((0.0,), 2.0), g)
    vals = [obs_constant_estimate(m, 1.0).value for m in (small, mid, big)]
    assert vals[0] >= vals[1] * (1 - 1e-6)
    assert vals[1] >= vals[2] * (1 - 1e-6)


def test_ball_much_worse_than_stripes():
    g = make_grid(1, 8, 32)
    stripes = obs_constant_estimate(rasterize(PeriodicStripes(0, 0.5, 1.0), g), 1.0)
    ball = obs_constant_estimate(rasterize(Ball((0.0,), 1.0), g), 1.0)
    assert ball.value > 1e3 * stripes.value


def test_estimate_dominates_forms_ratio():
    g = make_grid(1, 8, 64)
    mask = rasterize(PeriodicStripes(0, 0.5, 1.0), g)
    est = obs_constant_estimate(mask, 1.0)
    for seed in range(5):
        u0 = random_bandlimited(g, 6.0, seed)
        num, den = obs_forms(u0, mask, 1.0)
        assert num / den <= est.value * (1 + 1e-8)
    num, den = obs_forms(GridFunction(g, est.vector), mask, 1.0)
    assert num / den == pytest.approx(est.value, rel=1e-6)


def test_obs_errors():
    g = make_grid(1, 8, 32)
    with pytest.raises(EmptyObservationSet):
        obs_constant_estimate(IndicatorMask(g, np.zeros(32, bool)), 1.0)
    with pytest.raises(ZeroInput):
        obs_forms(GridFunction(g, np.zeros(32)), rasterize(FullSpace(), g), 1.0)


def test_interpolation_constant():
    g = make_grid(1, 20, 512)
    full = rasterize(FullSpace(), g)
    u0 = GridFunction(g, np.exp(-g.coords ** 2))
    # E = whole space: c = (1-theta) ln(||u(T)||^2 / ||u0||^2) / (1 + 1/T) <= 0
    c = interpolation_constant(u0, full, 1.0, 0.5)
    from heatobs.heat import propagate
    expect = 0.5 * math.log(propagate(u0, 1.0).norm_sq() / u0.norm_sq()) / 2
    assert c == pytest.approx(expect, rel=1e-12)
    with pytest.raises(ObservationVanishes):
        interpolation_constant(u0, IndicatorMask(g, np.zeros(512, bool)), 1.0, 0.5)
    with pytest.raises(ValueError):
        interpolation_constant(u0, full, 1.0, 1.0)


def test_telescope_defaults_exact():
    for T in (1.0, 9.0, 0.3):
        s = telescope_schedule(T)
        assert s.levels[0] - s.levels[2] == pytest.approx(T / 9, rel=1e-15)
        assert s.mu == 2.0
    assert telescope_schedule(9.0).levels[0] - telescope_schedule(9.0).levels[2] == 1.0


def test_telescope_levels_decrease_to_l():
    s = telescope_schedule(1.0, terms=40)
    assert np.all(np.diff(s.levels) < 0)
    assert s.levels[-1] - s.l < 1e-3


def test_telescope_lambda_range():
    for lam in (0.7, 1.0, 0.5):
        with pytest.raises(InvalidLambda):
            telescope_schedule(1.0, lam=lam)


def test_telescope_log_cobs_formula():
    s = telescope_schedule(1.0, c_hold=2.0)
    lam = math.sqrt(2 / 3)
    c_prime = 1 + lam + 4 * (1 + lam) / lam
    assert s.log_c_obs == pytest.approx(math.log(3) + 4 + 2 * c_prime * 9, rel=1e-12)


def test_predicted_cobs_overflow_flag():
    assert not predicted_cobs(0.0, 1.0).overflow
    big = predicted_cobs(10.0, 1.0)
    assert big.overflow and big.value == math.inf and big.log == pytest.approx(36 * 31 * 2)
