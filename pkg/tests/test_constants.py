import math

import numpy as np
import pytest

from heatobs.constants import (LogScalar, c_hold_formula, c_spec_formula, corollary_chain,
                               log_predicted_cobs, thickness_factor)
from heatobs.errors import InvalidTheta, InvalidThickness


def reference_chain(gamma, L, theta, T, C):
    """Independent evaluator written directly from the stated formulas (log1p form)."""
    tf = 1 + math.log1p(1 / gamma - 1) if gamma < 1 else 1.0
    cs = C * (L + 1) * tf
    ch = (cs + 1) * (cs + 1) / (1 - theta) + math.log(12)
    lobs = 36 * (3 * ch + 1) * (T + 1) / T
    geo = ((1 + L) * tf) ** 2
    return cs, ch, lobs, C * geo / (1 - theta), 300 * (C + 1) * geo * (T + 1) / T


def test_chain_matches_reference_on_random_tuples():
    rng = np.random.default_rng(20240601)
    for _ in range(20):
        gamma = float(rng.uniform(1e-3, 1))
        L = float(rng.uniform(0.1, 10))
        theta = float(rng.uniform(0.01, 0.99))
        T = float(rng.uniform(0.05, 5))
        C = float(rng.uniform(0.1, 3))
        ch = corollary_chain(1, gamma, L, theta, T, C)
        ref = reference_chain(gamma, L, theta, T, C)
        got = (ch.c_spec, ch.c_hold, ch.c_obs.log, ch.c_hold_corollary, ch.c_obs_corollary.log)
        for a, b in zip(got, ref):
            assert a == pytest.approx(b, rel=1e-12)


def test_c_hold_pinned_value():
    assert c_hold_formula(1.0, 0.5) == pytest.approx(8 + math.log(12), abs=1e-12)


def test_thickness_factor():
    assert thickness_factor(1.0) == 1.0
    assert thickness_factor(math.exp(-2)) == pytest.approx(3.0)
    for bad in (0.0, -0.1, 1.5):
        with pytest.raises(InvalidThickness):
            thickness_factor(bad)


def test_c_spec_scales_with_generic_C():
    assert c_spec_formula(2, 0.5, 1.0, 3.0) == pytest.approx(3 * c_spec_formula(2, 0.5, 1.0, 1.0))


def test_theta_domain():
    for bad in (0.0, 1.0):
        with pytest.raises(InvalidTheta):
            c_hold_formula(1.0, bad)


def test_log_scalar_overflow():
    s = LogScalar(1000.0)
    assert s.overflow and s.value == math.inf and s.flags == ("OVERFLOW",)
    assert LogScalar(1.0).value == pytest.approx(math.e)


def test_chain_flags_overflow():
    ch = corollary_chain(1, 0.01, 5.0, 0.5, 0.1)
    assert "OVERFLOW" in ch.flags
    assert math.isfinite(ch.c_obs.log)


def test_log_predicted_cobs():
    assert log_predicted_cobs(0.0, 1.0) == 72.0


def test_growth_order_cross_check():
    # corollary forms share the (1+L)^2 (1+ln 1/gamma)^2 growth of the chain
    ratios = [corollary_chain(1, g, L, 0.5, 1.0).hold_ratio for g in (1e-2, 1e-4, 1e-8) for L in (10, 100, 1000)]
    assert max(ratios) / min(ratios) < 3.0
