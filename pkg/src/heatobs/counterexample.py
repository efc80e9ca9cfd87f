"""Negative results: translated Gaussians defeat ball-to-ball observability, and
far Gaussians show why thickness is necessary."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .errors import PERIODIZATION_RISK, BoundNotApplicable, InvalidRadii, InvalidTime
from .grid import GridFunction, TorusGrid, make_grid, tail_fraction
from .heat import (GaussianSolutionSpec, gaussian_solution_eval, gaussian_solution_grid,
                   heat_kernel_quadrature, propagate, propagate_many)
from .observability import TimeQuadrature, time_quadrature
from .weak_obs import WeightSpec, unit_ball_volume

TAIL_THRESHOLD = 1e-12


@dataclass(frozen=True)
class TranslatedGaussianFamily:
    """u_k(t, x) = (4 pi (t+1))^{-n/2} exp(-|x - k e_1|^2 / (4(t+1)))."""

    n: int
    k: float

    @property
    def center(self) -> tuple:
        return (float(self.k),) + (0.0,) * (self.n - 1)

    def solution_spec(self) -> GaussianSolutionSpec:
        return GaussianSolutionSpec(self.n, self.center)


def translated_gaussian_eval(fam: TranslatedGaussianFamily, t: float, x) -> np.ndarray:
    return gaussian_solution_eval(fam.solution_spec(), t, x)


def _check_radii(r, r_prime):
    if not r > 0:
        raise InvalidRadii(f"r must be positive, got {r}")
    if not r_prime > r:
        raise InvalidRadii(f"need r' > r, got r = {r}, r' = {r_prime}")


def validity_threshold(n: int, T: float, r: float, r_prime: float) -> float:
    """max(r + sqrt(2n(T+1)), r'): below it the monotone-in-time step fails."""
    return max(r + math.sqrt(2 * n * (T + 1)), r_prime)


def ratio_bound_closed_form(n: int, T: float, r: float, r_prime: float, k: float) -> float:
    """T (3r/sigma)^n exp[((sigma/3)^2 - (2 sigma/3)(k - r)) / (2(T+1))], sigma = r' - r."""
    _check_radii(r, r_prime)
    if not T > 0:
        raise InvalidTime("T must be positive")
    if not k > validity_threshold(n, T, r, r_prime):
        raise BoundNotApplicable(
            f"k = {k} must exceed max(r + sqrt(2n(T+1)), r') = {validity_threshold(n, T, r, r_prime):.6g}")
    sigma = r_prime - r
    expo = ((sigma / 3) ** 2 - (2 * sigma / 3) * (k - r)) / (2 * (T + 1))
    return T * (3 * r / sigma) ** n * math.exp(expo)


def num_upper_bound(n: int, T: float, r: float, k: float) -> float:
    """r^n T V_n (4 pi (T+1))^{-n} exp(-(k-r)^2 / (2(T+1)))."""
    return r ** n * T * unit_ball_volume(n) / (4 * math.pi * (T + 1)) ** n * math.exp(-(k - r) ** 2 / (2 * (T + 1)))


def ball_coverage(grid: TorusGrid, center, radius: float, subsamples: int = 8) -> np.ndarray:
    """Fraction of each grid cell lying inside the closed ball.

    Exact in 1-D.  In higher dimension only cells straddling the sphere are
    subsampled (``subsamples`` points per axis); the rest are 0 or 1.
    """
    c = np.zeros(grid.n) + np.asarray(center, dtype=float)
    h = grid.spacing
    if grid.n == 1:
        x = grid.coords - c[0]
        lo = np.maximum(x - h / 2, -radius)
        hi = np.minimum(x + h / 2, radius)
        return np.clip(hi - lo, 0.0, None) / h
    d = np.sqrt(grid.displacement_sq(c, periodic=False))
    half_diag = 0.5 * h * math.sqrt(grid.n)
    cov = (d <= radius - half_diag).astype(float)
    edge = np.flatnonzero((np.abs(d - radius) < half_diag).reshape(-1))
    offs = (np.arange(subsamples) + 0.5) / subsamples - 0.5
    sub = np.array(list(itertools.product(offs, repeat=grid.n))) * h
    idx = np.unravel_index(edge, grid.shape)
    pts = np.stack([grid.coords[i] for i in idx], axis=1) - c
    inside = np.sum((pts[:, None, :] + sub[None]) ** 2, axis=2) <= radius * radius
    flat = cov.reshape(-1)
    flat[edge] = inside.mean(axis=1)
    return flat.reshape(grid.shape)


def default_grid(n: int, k: float, spacing: float = 0.005) -> TorusGrid:
    """Side = smallest even integer >= 2k + 40, M a power of two with h <= spacing (n = 1).

    Higher dimensions use a coarser h so the sample count stays moderate.
    """
    side = 2 * math.ceil((2 * k + 40) / 2)
    if n > 1:
        spacing = max(spacing, 0.1 if n == 2 else 0.25)
    M = 2 ** math.ceil(math.log2(side / spacing))
    return make_grid(n, side, M)


@dataclass(frozen=True)
class RatioResult:
    k: float
    num: float
    den: float
    ratio: float
    bound: Optional[float]
    num_bound: Optional[float]
    flags: Tuple[str, ...]


def _family_on_grid(n, k, grid):
    fam = TranslatedGaussianFamily(n, k)
    return gaussian_solution_grid(fam.solution_spec(), grid, 0.0)


def _box_indices(grid: TorusGrid, radius: float):
    # per-axis indices of cells that can touch the centered ball of this radius
    x = grid.coords
    return [np.flatnonzero(np.abs(x) <= radius + grid.spacing)] * grid.n


def _ball_space_time(u0, r, quad, method):
    g = u0.grid
    n = g.n
    cov = ball_coverage(g, (0.0,) * n, r) * g.cell_volume
    if method == "spectral":
        stack = propagate_many(u0, quad.nodes)
        return quad.integrate(np.sum(np.abs(stack) ** 2 * cov, axis=tuple(range(1, n + 1))))
    idx = _box_indices(g, r)
    sub = cov[np.ix_(*idx)]
    per_node = [float(np.sum(heat_kernel_quadrature(u0, t, idx) ** 2 * sub)) for t in quad.nodes]
    return quad.integrate(per_node)


def _ball_final(u0, uT, r, T, method):
    g = u0.grid
    cov = ball_coverage(g, (0.0,) * g.n, r) * g.cell_volume
    if method == "spectral":
        return float(np.sum(np.abs(uT.values) ** 2 * cov))
    idx = _box_indices(g, r)
    return float(np.sum(heat_kernel_quadrature(u0, T, idx) ** 2 * cov[np.ix_(*idx)]))


def _check_method(method):
    if method not in ("kernel", "spectral"):
        raise ValueError(f"method must be 'kernel' or 'spectral', got {method!r}")


def ratio_numeric(n: int, T: float, r: float, r_prime: float, k: float,
                  grid: Optional[TorusGrid] = None, quad: Optional[TimeQuadrature] = None,
                  method: str = "kernel") -> RatioResult:
    """num = int_0^T int_{B_r} u_k^2 and den = int_{B_r'} u_k(T)^2 from sampled u_k(0).

    ``method="kernel"`` evaluates u_k on the balls by heat-kernel quadrature;
    ``"spectral"`` uses the FFT propagator, which loses everything below
    about 1e-32 of the peak energy (k >= 20 at the defaults).  Ball integrals
    use fractional cell coverage.  ``bound`` is the closed form when k is in
    its validity range, else None.
    """
    _check_method(method)
    _check_radii(r, r_prime)
    if not T > 0:
        raise InvalidTime("T must be positive")
    grid = grid if grid is not None else default_grid(n, k)
    quad = quad if quad is not None else time_quadrature(T)
    u0 = _family_on_grid(n, k, grid)
    uT = propagate(u0, T)
    num = _ball_space_time(u0, r, quad, method)
    den = _ball_final(u0, uT, r_prime, T, method)
    flags = []
    if max(tail_fraction(u0), tail_fraction(uT)) >= TAIL_THRESHOLD:
        flags.append(PERIODIZATION_RISK)
    valid = k > validity_threshold(n, T, r, r_prime)
    return RatioResult(
        k=k, num=num, den=den, ratio=num / den,
        bound=ratio_bound_closed_form(n, T, r, r_prime, k) if valid else None,
        num_bound=num_upper_bound(n, T, r, k) if k > r + math.sqrt(2 * n * (T + 1)) else None,
        flags=tuple(flags),
    )


def den_closed_form_1d(T: float, r_prime: float, k: float) -> float:
    """int_{-r'}^{r'} u_k(T)^2 dx in 1-D via the error function."""
    from scipy.special import ndtr

    s = T + 1
    sd = math.sqrt(s)
    # u_k(T)^2 = (4 pi s)^{-1} exp(-(x-k)^2/(2s)), a scaled normal density with variance s
    return math.sqrt(2 * math.pi * s) / (4 * math.pi * s) * (ndtr((r_prime - k) / sd) - ndtr((-r_prime - k) / sd))


def weighted_failure_ratio(n: int, T: float, r: float, k: float, rho: WeightSpec,
                           grid: Optional[TorusGrid] = None,
                           quad: Optional[TimeQuadrature] = None, method: str = "kernel") -> float:
    """int rho u_k(T)^2 over int_0^T int_{B_r} u_k^2; unbounded in k for decaying rho."""
    _check_method(method)
    grid = grid if grid is not None else default_grid(n, k)
    quad = quad if quad is not None else time_quadrature(T)
    u0 = _family_on_grid(n, k, grid)
    uT = propagate(u0, T)
    weight = np.exp(rho.log_weight(np.sqrt(grid.radius_sq)))
    top = grid.cell_volume * float(np.sum(weight * np.abs(uT.values) ** 2))
    return top / _ball_space_time(u0, r, quad, method)


@dataclass(frozen=True)
class FarGaussianResult:
    obs_energy: float
    bound: float
    target_energy: float
    measure_lower_bound: Optional[float]
    flags: Tuple[str, ...]

    @property
    def holds(self) -> bool:
        return self.obs_energy <= self.bound


def far_gaussian_bound(n: int, L: float) -> float:
    """(2 pi)^{-n/2} exp(-L^2/8)."""
    return (2 * math.pi) ** (-n / 2) * math.exp(-L * L / 8)


def far_gaussian_target(n: int) -> float:
    """int |v(1, x)|^2 dx = 4^{-n} pi^{-n/2}."""
    return 4.0 ** (-n) * math.pi ** (-n / 2)


def far_gaussian_demo(n: int, x0, L: float, grid: Optional[TorusGrid] = None,
                      quad: Optional[TimeQuadrature] = None,
                      c_obs: Optional[float] = None) -> FarGaussianResult:
    """Observe v (the Gaussian solution centered at x0) only at distance >= L from x0 over t in [0, 1].

    ``measure_lower_bound`` is (2C)^{-1} pi^{n/2} for a supplied candidate
    observability constant C, the least measure E must have inside B_L(x0).
    """
    if not L > 0:
        raise ValueError("L must be positive")
    if grid is None:
        grid = make_grid(n, 40.0, 2048 if n == 1 else 256)
    quad = quad if quad is not None else time_quadrature(1.0)
    if not math.isclose(quad.T, 1.0):
        raise InvalidTime("the far-Gaussian demo runs on [0, 1]")
    spec = GaussianSolutionSpec(n, tuple(np.zeros(n) + np.asarray(x0, dtype=float)))
    v0 = gaussian_solution_grid(spec, grid, 0.0, periodic=True)
    far = 1.0 - ball_coverage_periodic(grid, spec.center, L)
    stack = propagate_many(v0, quad.nodes)
    obs = quad.integrate(grid.cell_volume * np.sum(np.abs(stack) ** 2 * far, axis=tuple(range(1, n + 1))))
    v1 = propagate(v0, 1.0)
    flags = (PERIODIZATION_RISK,) if max(tail_fraction(_recentered(v0, spec.center)),
                                         tail_fraction(_recentered(v1, spec.center))) >= TAIL_THRESHOLD else ()
    return FarGaussianResult(
        obs_energy=obs,
        bound=far_gaussian_bound(n, L),
        target_energy=v1.norm_sq(),
        measure_lower_bound=None if c_obs is None else math.pi ** (n / 2) / (2 * c_obs),
        flags=flags,
    )


def _recentered(f: GridFunction, center) -> GridFunction:
    # tail monitor is about the distance to the torus seam as seen from the data's center
    shifts = [int(round(c / f.grid.spacing)) for c in center]
    return GridFunction(f.grid, np.roll(f.values, [-s for s in shifts], axis=tuple(range(f.grid.n))))


def ball_coverage_periodic(grid: TorusGrid, center, radius: float) -> np.ndarray:
    """Coverage of the ball around ``center`` with distance measured on the torus."""
    shifts = [int(round(c / grid.spacing)) for c in center]
    rest = np.asarray(center, dtype=float) - np.array(shifts) * grid.spacing
    cov = ball_coverage(grid, rest, radius)
    return np.roll(cov, shifts, axis=tuple(range(grid.n)))
