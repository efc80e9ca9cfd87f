"""Weighted spaces, annulus decomposition, and an audit engine for weighted inequalities.

Every audit evaluates both sides of one inequality on concrete data and
reports ``margin = rhs / lhs``.  Right-hand sides are assembled in log space
because several of them contain exponentials of exponentials.  Factors that
are fixed numbers are kept apart from the unnamed dimensional constants
("knobs"), which default to values produced by :func:`calibrate`.
"""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, Optional, Tuple

import numpy as np
from scipy.special import gammaln, logsumexp

from .errors import (INTERPRETED, OVERFLOW, PERIODIZATION_RISK, VACUOUS, NonFiniteInput,
                     OutOfDomain, PreconditionFailed)
from .grid import GridFunction, forward_values, spectral_derivative, tail_fraction
from .heat import heat_kernel_quadrature, propagate, propagate_many
from .observability import TimeQuadrature, time_quadrature
from .sets import Ball, IndicatorMask, rasterize
from .spectral import multi_indices

GROWTH_TAIL = 1e-14
SPECTRAL_FLOOR = 1e-13
LOG_FLOAT_MAX = math.log(np.finfo(float).max)


# ---------------------------------------------------------------- weights

class WeightSpec:
    """Radial weight w(x) = exp(log_weight(|x|))."""

    growth = False

    def log_weight(self, r):
        raise NotImplementedError


@dataclass(frozen=True)
class ExpGrowth(WeightSpec):
    """exp(a |x|^nu)."""

    a: float
    nu: float = 1.0
    growth = True

    def __post_init__(self):
        if not (self.a > 0 and self.nu > 0):
            raise ValueError("ExpGrowth needs a > 0 and nu > 0")

    def log_weight(self, r):
        return self.a * np.asarray(r, dtype=float) ** self.nu


@dataclass(frozen=True)
class PolyGrowth(WeightSpec):
    """<x>^nu with <x> = (1 + |x|^2)^(1/2)."""

    nu: float
    growth = True

    def __post_init__(self):
        if not self.nu > 0:
            raise ValueError("PolyGrowth needs nu > 0")

    def log_weight(self, r):
        return 0.5 * self.nu * np.log1p(np.asarray(r, dtype=float) ** 2)


@dataclass(frozen=True)
class ExpDecay(WeightSpec):
    """exp(-|x|)."""

    def log_weight(self, r):
        return -np.asarray(r, dtype=float)


@dataclass(frozen=True)
class PolyDecay(WeightSpec):
    """<x>^(-nu)."""

    nu: float

    def __post_init__(self):
        if not self.nu > 0:
            raise ValueError("PolyDecay needs nu > 0")

    def log_weight(self, r):
        return -0.5 * self.nu * np.log1p(np.asarray(r, dtype=float) ** 2)


@dataclass(frozen=True)
class _Decay(WeightSpec):
    a: float

    def log_weight(self, r):
        return -self.a * np.asarray(r, dtype=float)


def weight_eval(w: WeightSpec, x) -> np.ndarray:
    """Weight at point(s) ``x`` (last axis = coordinates, or a scalar in 1-D)."""
    x = np.asarray(x, dtype=float)
    r = np.sqrt(np.sum(x * x, axis=-1)) if x.ndim else abs(x)
    return np.exp(w.log_weight(r))


def log_weighted_norm_sq(f: GridFunction, w: WeightSpec) -> float:
    """log of h^n sum w |f|^2, stable when the weight itself would overflow."""
    r = np.sqrt(f.grid.radius_sq)
    mod2 = np.abs(f.values) ** 2
    nz = mod2 > 0
    if not np.any(nz):
        return -math.inf
    return float(logsumexp(w.log_weight(r[nz]) + np.log(mod2[nz]))) + math.log(f.grid.cell_volume)


def weighted_norm_sq(f: GridFunction, w: WeightSpec) -> float:
    """h^n sum_x w(x) |f(x)|^2 with |x| taken in the fundamental cell."""
    val = f.grid.cell_volume * float(np.sum(np.exp(w.log_weight(np.sqrt(f.grid.radius_sq))) * np.abs(f.values) ** 2))
    if not math.isfinite(val):
        raise NonFiniteInput("weighted norm overflowed")
    return val


def log_spectral_weighted_norm_sq(f: GridFunction, a: float, s: float = 2.0,
                                  floor: float = SPECTRAL_FLOOR) -> float:
    """log of int |fhat|^2 exp(a |xi|^s) d xi on the frequency lattice.

    Coefficients below ``floor`` times the peak are round-off and are dropped.
    If the weighted integrand has not decayed by the time coefficients reach
    1e3 times the floor, the weighted norm is not resolved on this grid and
    PreconditionFailed is raised.
    """
    g = f.grid
    fh = np.abs(forward_values(f.values, g)) ** 2
    peak = fh.max()
    if peak == 0:
        return -math.inf
    keep = fh > (floor ** 2) * peak
    logs = np.log(fh[keep]) + a * np.sqrt(g.freq_sq[keep]) ** s
    total = logsumexp(logs)
    edge = fh[keep] < (1e3 * floor) ** 2 * peak
    if np.any(edge) and logsumexp(logs[edge]) - total > math.log(1e-8):
        raise PreconditionFailed("fhat in L^2(exp(a|xi|^s)): weighted spectrum not resolved on this grid")
    return float(total + g.n * math.log(g.freq_step))


def persistence_failure_profile(grid, nu: float, t: float, radii) -> np.ndarray:
    """Truncated weighted energies for the datum u0 = exp(-|x|^nu / 2) <x>^{-n}.

    Returns rows (R, ln int_{B_R} e^{|x|^nu} |u0|^2, ln int_{B_R} e^{|x|^nu} |e^{t Delta} u0|^2).
    For nu > 1 the last column keeps growing with R although the middle one
    converges: the heat flow leaves L^2(e^{|x|^nu}).  Values of the flow come
    from kernel quadrature so the weight does not amplify FFT round-off.
    """
    r = np.sqrt(grid.radius_sq)
    u0 = GridFunction(grid, np.exp(-0.5 * r ** nu) * (1 + r * r) ** (-grid.n / 2))
    ut = heat_kernel_quadrature(u0, t, [np.arange(grid.samples)] * grid.n)
    lw = r ** nu
    log_h = math.log(grid.cell_volume)
    with np.errstate(divide="ignore"):
        l0 = lw + 2 * np.log(np.abs(u0.values))
        lt = lw + 2 * np.log(np.abs(ut))
    out = []
    for R in radii:
        if R > grid.side_length / 2:
            raise OutOfDomain(f"radius {R} exceeds half the torus side")
        inside = r < R
        out.append((R, log_h + float(logsumexp(l0[inside])), log_h + float(logsumexp(lt[inside]))))
    return np.array(out)


# ---------------------------------------------------------------- annuli

@dataclass(frozen=True)
class AnnulusSet:
    """Masks of Omega_j = {j-1 <= |x| < j}, j = 1..jmax."""

    masks: Tuple[IndicatorMask, ...]

    @property
    def jmax(self) -> int:
        return len(self.masks)

    def __getitem__(self, j: int) -> IndicatorMask:
        """1-based access: ``annuli[j]`` is Omega_j."""
        if not 1 <= j <= self.jmax:
            raise IndexError(j)
        return self.masks[j - 1]


def annulus_masks(grid, jmax: int) -> AnnulusSet:
    if jmax < 1:
        raise ValueError("jmax must be >= 1")
    if jmax > grid.side_length / 2:
        raise OutOfDomain(f"jmax = {jmax} exceeds half the torus side {grid.side_length / 2}")
    r = np.sqrt(grid.radius_sq)
    inner = rasterize(Ball((0.0,) * grid.n, 1.0), grid).values
    out = [IndicatorMask(grid, inner)]
    for j in range(2, jmax + 1):
        out.append(IndicatorMask(grid, (r >= j - 1) & (r < j)))
    return AnnulusSet(tuple(out))


# ---------------------------------------------------------------- reports

@dataclass(frozen=True)
class AuditReport:
    descriptor: str
    digest: str
    lhs: float
    rhs: float
    margin: float
    log_lhs: float
    log_rhs: float
    knobs: Dict[str, float]
    minimal_generic_constant: Optional[float]
    flags: Tuple[str, ...] = ()
    details: Dict[str, object] = field(default_factory=dict)

    @property
    def holds(self) -> bool:
        return self.margin >= 1.0 or VACUOUS in self.flags


@dataclass(frozen=True)
class InequalityDescriptor:
    """One audited inequality.

    ``knobs`` maps each unnamed constant to its default; everything else in
    the right-hand side is a fixed number.  ``min_knob`` names the knob for
    which the report gives the smallest admissible value.
    """

    id: str
    summary: str
    knobs: Dict[str, float]
    min_knob: Optional[str]
    evaluate: Callable = field(repr=False, compare=False)


def _digest(inputs: dict) -> str:
    h = hashlib.sha256()
    for key in sorted(inputs):
        val = inputs[key]
        h.update(key.encode())
        if isinstance(val, GridFunction):
            h.update(repr((val.grid.n, val.grid.side_length, val.grid.samples)).encode())
            h.update(np.ascontiguousarray(val.values).tobytes())
        elif isinstance(val, TimeQuadrature):
            h.update(val.nodes.tobytes() + val.weights.tobytes())
        else:
            h.update(repr(val).encode())
    return h.hexdigest()[:16]


def _exp(x: float) -> float:
    return math.inf if x > LOG_FLOAT_MAX else math.exp(x)


def _log(x: float) -> float:
    return math.log(x) if x > 0 else -math.inf


def _need(inputs, *names):
    missing = [n for n in names if n not in inputs]
    if missing:
        raise PreconditionFailed(f"missing input(s): {', '.join(missing)}")
    return [inputs[n] for n in names]


def _check_theta(theta):
    if not 0 < theta < 1:
        raise PreconditionFailed("theta in (0,1)")


def _growth_flags(*fs, threshold=GROWTH_TAIL):
    return [PERIODIZATION_RISK] if any(tail_fraction(f) >= threshold for f in fs) else []


def _ball_integral(f: GridFunction, radius: float) -> float:
    m = rasterize(Ball((0.0,) * f.grid.n, radius), f.grid)
    return f.grid.cell_volume * float(np.sum(np.abs(f.values[m.values]) ** 2))


def _space_time(u0: GridFunction, radius: float, quad: TimeQuadrature) -> float:
    m = rasterize(Ball((0.0,) * u0.grid.n, radius), u0.grid).values
    stack = propagate_many(u0, quad.nodes)
    return quad.integrate(u0.grid.cell_volume * np.sum(np.abs(stack[:, m]) ** 2, axis=1))


def unit_ball_volume(n: int) -> float:
    return math.pi ** (n / 2) / math.gamma(n / 2 + 1)


# ---------------------------------------------------------------- evaluators
# Each returns (log_lhs, log_rhs, minimal knob or None, details, flags).

def _persist_exp(inp, knobs):
    u0, a, nu, t = _need(inp, "u0", "a", "nu", "t")
    if not 0 < nu <= 1:
        raise PreconditionFailed("nu in (0,1]")
    if not (a > 0 and t > 0):
        raise PreconditionFailed("a > 0 and t > 0")
    w = ExpGrowth(a, nu)
    ut = propagate(u0, t)
    n = u0.grid.n
    log_fac = 0.5 * n * math.log(2) + a ** (2 / (2 - nu)) * t ** (nu / (2 - nu))
    ll = 0.5 * log_weighted_norm_sq(ut, w)
    lr = log_fac + 0.5 * log_weighted_norm_sq(u0, w)
    return ll, lr, None, {"log_factor": log_fac}, _growth_flags(u0, ut)


def _persist_poly(inp, knobs):
    u0, nu, t = _need(inp, "u0", "nu", "t")
    if not (nu >= 0 and t > 0):
        raise PreconditionFailed("nu >= 0 and t > 0")
    n = u0.grid.n
    ut = propagate(u0, t)
    if nu == 0:
        ll, l0 = 0.5 * _log(ut.norm_sq()), 0.5 * _log(u0.norm_sq())
    else:
        w = PolyGrowth(nu)
        ll, l0 = 0.5 * log_weighted_norm_sq(ut, w), 0.5 * log_weighted_norm_sq(u0, w)
    log_fac = (nu + 2) * math.log(4) + gammaln(nu / 2 + n) + math.log1p(t ** (nu / 4))
    return ll, log_fac + l0, None, {"log_factor": float(log_fac)}, _growth_flags(u0, ut)


def _deriv_sup(inp, knobs):
    f, a = _need(inp, "f", "a")
    form = inp.get("form", "gevrey")
    alpha_max = int(inp.get("alpha_max", 3))
    n = f.grid.n
    C = knobs["C"]
    per_order = []
    worst_margin = math.inf
    worst = None
    min_c = -math.inf
    if form == "gevrey":
        s = float(inp.get("s", 2.0))
        if not s > 0:
            raise PreconditionFailed("s > 0")
        lnorm = 0.5 * log_spectral_weighted_norm_sq(f, a, s)
    elif form == "analytic":
        b = float(inp.get("b", 1.0))
        if not b > 0:
            raise PreconditionFailed("b > 0")
        lnorm = 0.5 * log_spectral_weighted_norm_sq(f, a, 2.0)
    else:
        raise PreconditionFailed(f"unknown form {form!r}")
    for alpha in [(0,) * n] + multi_indices(n, alpha_max):
        order = sum(alpha)
        d = spectral_derivative(f, alpha)
        sup = float(np.max(np.abs(d.values)))
        ll = _log(sup)
        if form == "gevrey":
            log_fact = sum(gammaln(k + 1) for k in alpha) / s
            base = -(2 * order + 3 * n) / (2 * s) * math.log(a) + log_fact + lnorm
            lr = (order + 1) * math.log(C) + base
            cmin = math.exp((ll - base) / (order + 1)) if ll > -math.inf else 0.0
        else:
            base = gammaln(order + 1) - order * math.log(b) + lnorm
            scale = (1 + b * b) * (1 + 1 / a)
            lr = C * scale + base
            cmin = (ll - base) / scale
        per_order.append({"alpha": alpha, "log_lhs": ll, "log_rhs": lr, "min_C": cmin})
        min_c = max(min_c, cmin)
        if lr - ll < worst_margin:
            worst_margin, worst = lr - ll, (ll, lr)
    return worst[0], worst[1], min_c, {"per_order": per_order, "form": form}, []


def _annulus_terms(f, a, j):
    if int(j) != j or j < 1:
        raise PreconditionFailed("j >= 1 integer")
    ann = annulus_masks(f.grid, j + 1)
    h = f.grid.cell_volume
    mod2 = np.abs(f.values) ** 2
    outer = h * float(np.sum(mod2[ann[j + 1].values]))
    inner = h * float(np.sum(mod2[ann[j].values]))
    ball = h * float(np.sum(mod2[ann[1].values]))
    return outer, inner, ball, log_spectral_weighted_norm_sq(f, a, 2.0)


def _smallness(inp, knobs):
    f, a, j = _need(inp, "f", "a", "j")
    theta, C = knobs["theta"], knobs["C"]
    _check_theta(theta)
    n = f.grid.n
    outer, inner, _, lspec = _annulus_terms(f, a, j)
    base = (n - 1) * (1 - theta) * math.log(j) + theta * _log(inner) + (1 - theta) * lspec
    ll = _log(outer)
    cmin = (ll - base) / (1 + 1 / a) if ll > -math.inf else -math.inf
    return ll, base + C * (1 + 1 / a), cmin, {}, []


def _ring_chain(inp, knobs):
    f, a, j = _need(inp, "f", "a", "j")
    theta, C = knobs["theta"], knobs["C"]
    _check_theta(theta)
    n = f.grid.n
    outer, _, ball, lspec = _annulus_terms(f, a, j)
    tj = theta ** j
    base = (n - 1) * math.log(j) + tj * _log(ball) + (1 - tj) * lspec
    ll = _log(outer)
    cmin = (ll - base) / (1 + 1 / a) if ll > -math.inf else -math.inf
    return ll, base + C * (1 + 1 / a), cmin, {}, []


def _weighted_decay(inp, knobs):
    f, a, t, eps = _need(inp, "f", "a", "t", "eps")
    theta, C = knobs["theta"], knobs["C"]
    _check_theta(theta)
    if not (a > 0 and t > 0 and eps > 0):
        raise PreconditionFailed("a > 0, t > 0, eps > 0")
    n = f.grid.n
    lt = abs(math.log(theta))
    ll = log_weighted_norm_sq(f, _Decay(a))
    A = log_spectral_weighted_norm_sq(f, t, 2.0)
    B = _log(_ball_integral(f, 1.0))
    second = eps ** (-2 * lt / a)
    inner = np.logaddexp(math.log(eps) + A, second + B)
    base = float(np.logaddexp(0.0, -n * math.log(a) + gammaln(a / (2 * lt))) + inner)
    scale = 1 + 1 / t + a
    flags = [OVERFLOW] if second > LOG_FLOAT_MAX else []
    return ll, base + C * scale, (ll - base) / scale, {"log_A": A, "log_B": B}, flags


def series_sum_lhs(a: float, b: float, theta: float, rel_tail: float = 1e-12) -> float:
    """sum_{k>=1} b^(theta^k) e^(-a k), stopped when the geometric tail bound is below rel_tail."""
    total, k = 0.0, 1
    q = math.exp(-a)
    while True:
        total += b ** (theta ** k) * q ** k
        tail = q ** (k + 1) / (1 - q)
        if tail <= rel_tail * total:
            return total
        k += 1


def _series_sum(inp, knobs):
    a, b, theta = _need(inp, "a", "b", "theta")
    if not (a > 0 and 0 < b < 1 and 0 < theta < 1):
        raise PreconditionFailed("a > 0, b in (0,1), theta in (0,1)")
    variant = inp.get("gamma_argument", "theta")
    lt, lb = abs(math.log(theta)), abs(math.log(b))
    g_arg = a / lt if variant == "theta" else a / lb
    if variant not in ("theta", "stated"):
        raise PreconditionFailed("gamma_argument in {theta, stated}")
    ll = math.log(series_sum_lhs(a, b, theta))
    lr = a - math.log(lt) + gammaln(g_arg) - (a / lt) * math.log(lb)
    return ll, float(lr), None, {"gamma_argument": variant, "x": "b"}, [INTERPRETED]


def _weak_interp_exp(inp, knobs):
    u0, a, T, eps = _need(inp, "u0", "a", "T", "eps")
    theta, C = knobs["theta"], knobs["C"]
    _check_theta(theta)
    if not (a > 0 and T > 0 and eps > 0):
        raise PreconditionFailed("a > 0, T > 0, eps > 0")
    n = u0.grid.n
    lt = abs(math.log(theta))
    uT = propagate(u0, T)
    ll = _log(uT.norm_sq())
    Aw = log_weighted_norm_sq(u0, ExpGrowth(a, 1.0))
    B = _log(_ball_integral(uT, 1.0))
    second = eps ** (-4 * lt / a)
    inner = np.logaddexp(math.log(eps) + Aw, -math.log(eps) + second + B)
    g = -n * math.log(a) + gammaln(a / (2 * lt))
    pre = 0.5 * (np.logaddexp(0.0, g))
    base = float(pre + inner)
    scale = 1 + 1 / T + a + a * a * T
    flags = _growth_flags(u0) + ([OVERFLOW] if second > LOG_FLOAT_MAX else [])
    return ll, base + C * scale, (ll - base) / scale, {"log_Aw": Aw, "log_B": B}, flags


def _weak_interp_poly(inp, knobs):
    u0, nu, T, eps = _need(inp, "u0", "nu", "T", "eps")
    theta, C = knobs["theta"], knobs["C"]
    _check_theta(theta)
    if not 0 < nu <= 1:
        raise PreconditionFailed("nu in (0,1]")
    if not 0 < eps < 1:
        raise PreconditionFailed("eps in (0,1)")
    if not T > 0:
        raise PreconditionFailed("T > 0")
    lt = abs(math.log(theta))
    uT = propagate(u0, T)
    ll = _log(uT.norm_sq())
    Aw = log_weighted_norm_sq(u0, PolyGrowth(nu))
    B = _log(_ball_integral(uT, 1.0))
    expo = (3 * lt + 1) * (1 / eps) ** (1 / nu)
    second = _exp(expo)
    flags = _growth_flags(u0)
    if math.isinf(second):
        flags.append(OVERFLOW)
        inner = math.inf if B > -math.inf else math.log(eps) + Aw
    else:
        inner = float(np.logaddexp(math.log(eps) + Aw, second + B))
    base = math.log1p(T ** (nu / 2)) + inner
    scale = 1 + 1 / T
    return ll, base + C * scale, (ll - base) / scale, {"log_Aw": Aw, "log_B": B}, flags


def _quad(inp, T):
    q = inp.get("quad")
    return q if q is not None else time_quadrature(T)


def _local_recovery(inp, knobs):
    u0, T, r_in, r = _need(inp, "u0", "T", "r_prime", "r")
    if not 0 < r_in < r:
        raise PreconditionFailed("0 < r' < r")
    if not T > 0:
        raise PreconditionFailed("T > 0")
    n = u0.grid.n
    uT = propagate(u0, T)
    lhs = _ball_integral(uT, r_in)
    integral = _space_time(u0, r, _quad(inp, T))
    C = knobs["C"]
    rhs = (1 / T + C * n / (r - r_in) ** 2) * integral
    cmin = (lhs / integral - 1 / T) * (r - r_in) ** 2 / n if integral > 0 else math.inf
    return _log(lhs), _log(rhs), cmin, {"space_time": integral}, []


def _supported_obs(inp, knobs):
    u0, T, r, R = _need(inp, "u0", "T", "r", "R")
    if not 0 < r < R:
        raise PreconditionFailed("0 < r < M")
    if not T > 0:
        raise PreconditionFailed("T > 0")
    outside = ~rasterize(Ball((0.0,) * u0.grid.n, r), u0.grid).values
    amp = np.abs(u0.values)
    if np.any(amp[outside] > 1e-14 * amp.max()):
        raise PreconditionFailed("supp u0 in B_r")
    n = u0.grid.n
    lhs = propagate(u0, T).norm_sq()
    integral = _space_time(u0, R, _quad(inp, T))
    C = knobs["C"]
    rhs = (1 / T + C * n / (R - r) ** 2) * integral
    cmin = (lhs / integral - 1 / T) * (R - r) ** 2 / n if integral > 0 else math.inf
    return _log(lhs), _log(rhs), cmin, {"space_time": integral}, _growth_flags(propagate(u0, T), threshold=1e-12)


def measured_mu(u0: GridFunction, r: float) -> float:
    """Share of int u0 carried by B_r."""
    m = rasterize(Ball((0.0,) * u0.grid.n, r), u0.grid).values
    vals = u0.values.real
    return float(vals[m].sum() / vals.sum())


def _concentrated_obs(inp, knobs):
    u0, T, r, R = _need(inp, "u0", "T", "r", "R")
    if not (T > 0 and r > 0 and R > 0):
        raise PreconditionFailed("T, r, M > 0")
    vals = u0.values
    scale = np.abs(vals).max()
    if scale == 0 or np.any(np.abs(vals.imag) > 1e-14 * scale) or np.any(vals.real < -1e-14 * scale):
        raise PreconditionFailed("u0 >= 0")
    # mu = 1 is the limit of the mu < 1 statements; round-off can push the measured share past 1
    mu = inp.get("mu", min(measured_mu(u0, r), 1.0))
    if not 0 < mu <= 1:
        raise PreconditionFailed("int_{B_r} u0 >= mu int u0 with mu in (0,1)")
    if mu > min(measured_mu(u0, r), 1.0) * (1 + 1e-12):
        raise PreconditionFailed("int_{B_r} u0 >= mu int u0")
    n = u0.grid.n
    lhs = propagate(u0, T).norm_sq()
    integral = _space_time(u0, R, _quad(inp, T))
    rm = min(r, R)
    log_k = ((n / 2 + 1) * math.log(2) + (n / 2) * math.log(math.pi) + (n / 2 - 1) * math.log(T)
             - math.log(unit_ball_volume(n)) - n * math.log(rm) - 2 * math.log(mu) + 4 * r * r / T)
    flags = _growth_flags(propagate(u0, T), threshold=1e-12)
    return _log(lhs), log_k + _log(integral), None, {"mu": mu, "log_constant": log_k}, flags


# Knob defaults come from ``calibrate`` on the probe families in
# ``calibration_probes``; each is the calibrated minimum rounded up with a
# safety factor (see README).
DESCRIPTORS: Dict[str, InequalityDescriptor] = {}


def _register(id, summary, knobs, min_knob, fn):
    DESCRIPTORS[id] = InequalityDescriptor(id, summary, dict(knobs), min_knob, fn)


_register("PERSIST_EXP", "||e^{t Delta}u0||_{e^{a|x|^nu}} <= 2^{n/2} e^{a^{2/(2-nu)} t^{nu/(2-nu)}} ||u0||", {}, None, _persist_exp)
_register("PERSIST_POLY", "||e^{t Delta}u0||_{<x>^nu} <= 4^{nu+2} Gamma(nu/2+n)(1+t^{nu/4}) ||u0||", {}, None, _persist_poly)
_register("DERIV_SUP", "||D^alpha f||_inf <= C^{|alpha|+1} a^{-(2|alpha|+3n)/2s} (alpha!)^{1/s} ||fhat||_{e^{a|xi|^s}}", {"C": 1.0}, "C", _deriv_sup)
_register("SMALLNESS_ANNULUS", "int_{Omega_{j+1}} <= j^{(n-1)(1-theta)} e^{C(1+1/a)} (int_{Omega_j})^theta (spectral)^{1-theta}", {"theta": 0.5, "C": 1.0}, "C", _smallness)
_register("RING_CHAIN", "int_{Omega_{j+1}} <= j^{n-1} e^{C(1+1/a)} (int_{B_1})^{theta^j} (spectral)^{1-theta^j}", {"theta": 0.5, "C": 1.0}, "C", _ring_chain)
_register("WEIGHTED_DECAY", "int e^{-a|x|}|f|^2 <= e^{C(1+1/t+a)}(1+a^{-n}Gamma(a/2|ln theta|))(eps A + e^{eps^{-2|ln theta|/a}} B)", {"theta": 0.5, "C": 1.0}, "C", _weighted_decay)
_register("SERIES_SUM", "sum b^{theta^k} e^{-ak} <= e^a/|ln theta| Gamma(.) |ln b|^{-a/|ln theta|}", {}, None, _series_sum)
_register("WEAK_INTERP_EXP", "||u(T)||^2 <= C_1 (eps ||u0||^2_{e^{a|x|}} + eps^{-1} e^{eps^{-4|ln theta|/a}} int_{B_1}|u(T)|^2)", {"theta": 0.5, "C": 1.0}, "C", _weak_interp_exp)
_register("WEAK_INTERP_POLY", "||u(T)||^2 <= (1+T^{nu/2}) e^{C(1+1/T)} (eps ||u0||^2_{<x>^nu} + e^{e^{(3|ln theta|+1) eps^{-1/nu}}} int_{B_1}|u(T)|^2)", {"theta": 0.5, "C": 1.0}, "C", _weak_interp_poly)
_register("LOCAL_RECOVERY", "int_{B_r'}|u(T)|^2 <= (1/T + Cn/(r-r')^2) int_0^T int_{B_r}|u|^2", {"C": 1.0}, "C", _local_recovery)
_register("SUPPORTED_OBS", "||u(T)||^2 <= (1/T + Cn/(M-r)^2) int_0^T int_{B_M}|u|^2 for supp u0 in B_r", {"C": 1.0}, "C", _supported_obs)
_register("CONCENTRATED_OBS", "||u(T)||^2 <= 2^{n/2+1} pi^{n/2} T^{n/2-1} e^{4r^2/T} / (V_n (r^M)^n mu^2) int_0^T int_{B_M}|u|^2", {}, None, _concentrated_obs)


def audit_inequality(desc, inputs: dict, knobs: Optional[dict] = None) -> AuditReport:
    """Evaluate one inequality on ``inputs``.

    Parameters
    ----------
    desc : str or InequalityDescriptor
    inputs : dict
        Descriptor specific data (see each evaluator); GridFunctions for the
        functions, floats for parameters.
    knobs : dict, optional
        Overrides for the generic constants; unknown names are rejected.

    Raises
    ------
    PreconditionFailed
        Naming the violated hypothesis.
    """
    d = DESCRIPTORS[desc] if isinstance(desc, str) else desc
    used = dict(d.knobs)
    for k, v in (knobs or {}).items():
        if k not in used:
            raise PreconditionFailed(f"unknown knob {k!r} for {d.id}")
        used[k] = float(v)
    ll, lr, cmin, details, flags = d.evaluate(inputs, used)
    flags = list(dict.fromkeys(flags))
    if ll == -math.inf and lr == -math.inf:
        flags.append(VACUOUS)
        margin = math.nan
    elif ll == -math.inf:
        margin = math.inf
    else:
        margin = _exp(lr - ll)
    return AuditReport(
        descriptor=d.id,
        digest=_digest(inputs),
        lhs=_exp(ll),
        rhs=_exp(lr),
        margin=margin,
        log_lhs=float(ll),
        log_rhs=float(lr),
        knobs=used,
        minimal_generic_constant=None if cmin is None else float(cmin),
        flags=tuple(flags),
        details=details,
    )


# ---------------------------------------------------------------- calibration

def calibration_probes(grid, seeds=range(3)):
    """Gaussians of several widths and centers plus Gaussian-windowed random
    band-limited functions, all decaying well inside the torus."""
    from .spectral import random_bandlimited

    r2 = grid.radius_sq
    out = []
    for s in (0.25, 0.5, 1.0):
        for c in (0.0, 1.5):
            out.append(GridFunction(grid, np.exp(-grid.displacement_sq((c,) + (0.0,) * (grid.n - 1), periodic=False) / (4 * s))))
    for seed in seeds:
        f = random_bandlimited(grid, 3.0, seed)
        out.append(GridFunction(grid, f.values * np.exp(-r2 / 8)))
    return out


CALIBRATION_GRID = {
    "DERIV_SUP": [dict(a=a, s=2.0) for a in (0.25, 0.5)],
    "SMALLNESS_ANNULUS": [dict(a=a, j=j) for a in (0.5, 1.0) for j in (1, 2, 3)],
    "RING_CHAIN": [dict(a=a, j=j) for a in (0.5, 1.0) for j in (1, 2, 3)],
    "WEIGHTED_DECAY": [dict(a=a, t=t, eps=e) for a in (0.5, 1.0) for t in (0.1, 0.5) for e in (0.1, 1.0)],
    "WEAK_INTERP_EXP": [dict(a=a, T=T, eps=e) for a in (0.5, 1.0) for T in (0.5, 1.0) for e in (0.1, 1.0)],
    "WEAK_INTERP_POLY": [dict(nu=nu, T=T, eps=e) for nu in (0.5, 1.0) for T in (0.5, 1.0) for e in (0.3, 0.9)],
    "LOCAL_RECOVERY": [dict(T=T, r_prime=1.0, r=2.0) for T in (0.5, 1.0)],
}
_FUNCTION_KEY = {"DERIV_SUP": "f", "SMALLNESS_ANNULUS": "f", "RING_CHAIN": "f", "WEIGHTED_DECAY": "f"}


def calibrate(grid, seeds=range(3)) -> Dict[str, float]:
    """Largest minimal knob C per descriptor over the probe set, at the default theta.

    Probes whose spectral weight is not resolved on ``grid`` are skipped.
    """
    probes = calibration_probes(grid, seeds)
    worst = {}
    for desc, params in CALIBRATION_GRID.items():
        key = _FUNCTION_KEY.get(desc, "u0")
        best = -math.inf
        for p in params:
            for f in probes:
                try:
                    rep = audit_inequality(desc, {key: f, **p})
                except PreconditionFailed:
                    continue
                if rep.minimal_generic_constant is not None:
                    best = max(best, rep.minimal_generic_constant)
        worst[desc] = best
    return worst
