"""Band-limited functions, spectral-inequality constants, and the good/bad cube split."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Union as _U

import numpy as np
import scipy.fft as sfft
from scipy.optimize import bisect

from .errors import (BandLimitTooLarge, ConstantEffectivelyInfinite, CubesDontTile,
                     EmptyObservationSet, ZeroInput)
from .grid import GridFunction, TorusGrid, _check_finite, _check_same, forward_values, spectral_derivative
from .linalg import EigEstimate, extreme_eig
from .sets import IndicatorMask

LAMBDA_FLOOR = 1e-14


@dataclass(frozen=True)
class BandLimitSpec:
    """Radius N of the frequency ball B_N."""

    N: float

    def __post_init__(self):
        if not self.N > 0:
            raise ValueError(f"band limit must be positive, got {self.N}")


def _radius(N) -> float:
    return float(N.N if isinstance(N, BandLimitSpec) else N)


def check_band(grid: TorusGrid, N) -> float:
    N = _radius(N)
    if not N > 0:
        raise ValueError(f"band limit must be positive, got {N}")
    if N >= grid.max_frequency:
        raise BandLimitTooLarge(f"N = {N} is not below the grid's max frequency {grid.max_frequency:.6g}")
    return N


def band_mask(grid: TorusGrid, N) -> np.ndarray:
    """Boolean array (FFT order) of lattice frequencies with |xi| <= N."""
    N = check_band(grid, N)
    return grid.freq_sq <= N * N * (1 + 1e-14)


def band_indices(grid: TorusGrid, N) -> np.ndarray:
    """Flat FFT-order indices of B_N, ordered lexicographically by wavenumber."""
    inside = band_mask(grid, N)
    flat = np.flatnonzero(inside)
    ks = np.stack(np.unravel_index(flat, grid.shape))
    ks = grid.wavenumbers[ks]
    order = np.lexsort(ks[::-1])
    return flat[order]


def bandlimit_project(f: GridFunction, N) -> GridFunction:
    """Zero every Fourier mode with |xi| > N."""
    keep = band_mask(f.grid, N)
    _check_finite(f.values)
    return GridFunction(f.grid, sfft.ifftn(np.where(keep, sfft.fftn(f.values), 0.0)))


def random_bandlimited(grid: TorusGrid, N, seed: int, real: bool = False) -> GridFunction:
    """Unit-norm random function with spectrum in B_N.

    Coefficients are drawn in wavenumber order, so the same seed gives the
    same continuum function on any grid resolving the band.
    """
    idx = band_indices(grid, N)
    rng = np.random.default_rng(seed)
    c = rng.standard_normal(idx.size) + 1j * rng.standard_normal(idx.size)
    spec = np.zeros(grid.size, dtype=np.complex128)
    spec[idx] = c
    spec = spec.reshape(grid.shape)
    if real:
        flip = spec
        for ax in range(grid.n):
            flip = np.roll(np.flip(flip, axis=ax), 1, axis=ax)
        spec = 0.5 * (spec + np.conj(flip))
    vals = sfft.ifftn(spec)
    if real:
        vals = vals.real
    f = GridFunction(grid, vals)
    return f.scaled(1.0 / math.sqrt(f.norm_sq()))


class ConcentrationOperator:
    """P_N chi_G P_N restricted to band-limited coefficient vectors.

    Vectors are unitary-DFT coefficients on B_N, so the Euclidean inner
    product matches the L^2 inner product up to a constant factor.
    """

    def __init__(self, grid: TorusGrid, weight: np.ndarray, N):
        self.grid = grid
        self.idx = band_indices(grid, N)
        self.weight = np.asarray(weight, dtype=float)
        self.dim = self.idx.size

    def embed(self, v):
        full = np.zeros(self.grid.size, dtype=np.complex128)
        full[self.idx] = v
        return full.reshape(self.grid.shape)

    def to_samples(self, v):
        return sfft.ifftn(self.embed(v), norm="ortho")

    def __call__(self, v):
        g = self.weight * self.to_samples(v)
        return sfft.fftn(g, norm="ortho").reshape(-1)[self.idx]


def spectral_constant_estimate(mask: IndicatorMask, N, tol: float = 1e-8, seed: int = 0,
                               max_basis: int = 300, max_restarts: int = 30) -> EigEstimate:
    """Best constant C with ||f||^2 <= C int_E |f|^2 over f band-limited to B_N.

    C = 1 / lambda_min(P chi_E P).  The top eigenvector of the complement
    operator P chi_{E^c} P is found by Lanczos; lambda_min is then read off as
    the Rayleigh quotient of chi_E at that vector, which avoids the
    cancellation in 1 - lambda_max.

    Raises
    ------
    EmptyObservationSet
    ConstantEffectivelyInfinite
        When lambda_min < 1e-14; the exception carries the estimate.
    NotConverged
    """
    if mask.is_empty():
        raise EmptyObservationSet("observation mask is empty")
    grid = mask.grid
    op = ConcentrationOperator(grid, ~mask.values, N)
    rng = np.random.default_rng(seed)
    v0 = rng.standard_normal(op.dim) + 1j * rng.standard_normal(op.dim)
    theta, x, res, its, method = extreme_eig(op, v0, tol=tol, max_basis=max_basis, max_restarts=max_restarts)
    samples = op.to_samples(x)
    w = np.abs(samples) ** 2
    lam = float(np.sum(w[mask.values]) / np.sum(w))
    lam = min(lam, 1.0)
    est = EigEstimate(
        value=1.0 / lam if lam > 0 else math.inf,
        residual=res,
        iterations=its,
        converged=True,
        eigenvalue=lam,
        method=method,
        vector=samples,
    )
    if lam < LAMBDA_FLOOR:
        raise ConstantEffectivelyInfinite(
            f"lambda_min = {lam:.3e} below {LAMBDA_FLOOR:g}; constant not resolvable", est)
    return est


def solve_A0(n: int) -> float:
    """Root of s^n (s-1)^(-n) - 1 = 1/2 on [2, inf) by bisection."""
    if int(n) != n or n < 1:
        raise ValueError("n must be a positive integer")

    def g(s):
        return (s / (s - 1.0)) ** n - 1.5

    hi = 4.0
    while g(hi) > 0:
        hi *= 2.0
    return bisect(g, 2.0, hi, xtol=1e-13, rtol=4 * np.finfo(float).eps, maxiter=500)


def multi_indices(n: int, max_order: int, min_order: int = 1):
    """All beta in N^n with min_order <= |beta| <= max_order, graded order."""
    out = [b for b in itertools.product(range(max_order + 1), repeat=n) if min_order <= sum(b) <= max_order]
    return sorted(out, key=lambda b: (sum(b), tuple(-x for x in b)))


@dataclass(frozen=True)
class CubeClassification:
    cube_shape: tuple
    good: np.ndarray
    energies: np.ndarray
    A0: float
    beta_max: int
    N: float

    @property
    def total_energy(self) -> float:
        return float(self.energies.sum())

    @property
    def good_energy(self) -> float:
        return float(self.energies[self.good].sum())

    @property
    def good_fraction(self) -> float:
        return self.good_energy / self.total_energy


def _cube_labels(grid: TorusGrid) -> tuple:
    side = int(round(grid.side_length))
    if side < 1 or abs(grid.side_length - side) > 1e-9 * max(1.0, side):
        raise CubesDontTile(f"side length {grid.side_length} is not an integer")
    per_axis = np.mod(np.floor(grid.coords + 0.5).astype(np.int64), side)
    lab = np.zeros(grid.shape, dtype=np.int64)
    for ax in range(grid.n):
        lab = lab * side + grid.axis_view(per_axis, ax)
    return lab.reshape(-1), (side,) * grid.n


def classify_cubes(f: GridFunction, N, beta_max: int = 3) -> CubeClassification:
    """Label unit cubes Q(j) (centered at integer points) good or bad.

    A cube is good when, for every 1 <= |beta| <= beta_max,
    int_Q |d^beta f|^2 <= A0^|beta| N^(2|beta|) int_Q |f|^2.
    """
    N = check_band(f.grid, N)
    if beta_max < 1:
        raise ValueError("beta_max must be >= 1")
    labels, cshape = _cube_labels(f.grid)
    if not np.any(f.values):
        raise ZeroInput("classify_cubes needs a nonzero function")
    ncubes = int(np.prod(cshape))
    hvol = f.grid.cell_volume
    e0 = hvol * np.bincount(labels, weights=np.abs(f.values.reshape(-1)) ** 2, minlength=ncubes)
    A0 = solve_A0(f.grid.n)
    good = np.ones(ncubes, dtype=bool)
    for beta in multi_indices(f.grid.n, beta_max):
        d = spectral_derivative(f, beta)
        eb = hvol * np.bincount(labels, weights=np.abs(d.values.reshape(-1)) ** 2, minlength=ncubes)
        order = sum(beta)
        good &= eb <= (A0 ** order) * N ** (2 * order) * e0
    return CubeClassification(cshape, good.reshape(cshape), e0.reshape(cshape), A0, beta_max, N)


def high_frequency_energy(f: GridFunction, N) -> float:
    """int_{|xi| > N} |fhat|^2 on the lattice."""
    fh = forward_values(f.values, f.grid)
    outside = ~band_mask(f.grid, N)
    return float(f.grid.freq_step ** f.grid.n * np.sum(np.abs(fh[outside]) ** 2))


def uncertainty_audit(f: GridFunction, mask: IndicatorMask, N) -> float:
    """Smallest C' with ||f||^2 <= C' (int_E |f|^2 + int_{B_N^c} |fhat|^2)."""
    _check_same(f.grid, mask.grid)
    total = f.norm_sq()
    if total == 0:
        raise ZeroInput("uncertainty_audit needs a nonzero function")
    local = f.grid.cell_volume * float(np.sum(np.abs(f.values[mask.values]) ** 2))
    den = local + high_frequency_energy(f, N)
    return total / den if den > 0 else math.inf
