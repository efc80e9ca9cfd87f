"""Periodic grid on the box [-side/2, side/2)^n used as a stand-in for R^n.

Fourier coefficients follow the continuum convention

    fhat(xi) = (2 pi)^(-n/2) * integral exp(-i x.xi) f(x) dx,

discretized as ``h^n (2 pi)^(-n/2) sum_j f(x_j) exp(-i xi_k x_j)`` on the
lattice ``xi_k = 2 pi k / side``.  With this choice the discrete Parseval
identity reads ``h^n sum |f|^2 = (2 pi / side)^n sum |fhat|^2``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Optional, Sequence

import numpy as np
import scipy.fft as sfft

from .errors import GridMismatch, InvalidGrid, NonFiniteInput, OrderTooHigh

TAIL_SHELL = 0.05
TAIL_THRESHOLD = 1e-12
MAX_DERIVATIVE_ORDER = 6


@dataclass(frozen=True)
class TorusGrid:
    """Uniform grid with ``samples`` points per axis on a torus of side ``side_length``.

    Sample ``j`` along an axis sits at ``-side_length/2 + j*h``; each sample
    is the center of one cell of volume ``h**n``.
    """

    n: int
    side_length: float
    samples: int

    @property
    def spacing(self) -> float:
        return self.side_length / self.samples

    @property
    def shape(self) -> tuple:
        return (self.samples,) * self.n

    @property
    def size(self) -> int:
        return self.samples ** self.n

    @property
    def cell_volume(self) -> float:
        return self.spacing ** self.n

    @property
    def freq_step(self) -> float:
        return 2.0 * math.pi / self.side_length

    @property
    def max_frequency(self) -> float:
        return math.pi * self.samples / self.side_length

    @cached_property
    def coords(self) -> np.ndarray:
        """1-D sample positions along one axis."""
        return -0.5 * self.side_length + self.spacing * np.arange(self.samples)

    @cached_property
    def wavenumbers(self) -> np.ndarray:
        """Integer indices k in FFT order, from -M/2 to M/2-1."""
        return np.fft.fftfreq(self.samples, d=1.0 / self.samples).round().astype(np.int64)

    @cached_property
    def freqs(self) -> np.ndarray:
        return self.freq_step * self.wavenumbers

    def axis_view(self, vec: np.ndarray, axis: int) -> np.ndarray:
        """Reshape a 1-D per-axis array so it broadcasts along ``axis``."""
        shp = [1] * self.n
        shp[axis] = self.samples
        return np.asarray(vec).reshape(shp)

    def coordinate(self, axis: int) -> np.ndarray:
        return self.axis_view(self.coords, axis)

    def frequency(self, axis: int) -> np.ndarray:
        return self.axis_view(self.freqs, axis)

    @cached_property
    def radius_sq(self) -> np.ndarray:
        r2 = np.zeros(self.shape)
        for ax in range(self.n):
            r2 = r2 + self.coordinate(ax) ** 2
        r2.setflags(write=False)
        return r2

    @cached_property
    def freq_sq(self) -> np.ndarray:
        k2 = np.zeros(self.shape)
        for ax in range(self.n):
            k2 = k2 + self.frequency(ax) ** 2
        k2.setflags(write=False)
        return k2

    @cached_property
    def phase(self) -> np.ndarray:
        """(-1)^(k_1+...+k_n): accounts for the grid starting at -side/2."""
        ph = np.ones(self.shape)
        sign = np.where(self.wavenumbers % 2 == 0, 1.0, -1.0)
        for ax in range(self.n):
            ph = ph * self.axis_view(sign, ax)
        ph.setflags(write=False)
        return ph

    def displacement_sq(self, center: Sequence[float], periodic: bool = True) -> np.ndarray:
        """|x - center|^2 on the grid, using the minimum-image convention if periodic."""
        c = _as_point(center, self.n)
        d2 = np.zeros(self.shape)
        for ax in range(self.n):
            d = self.coords - c[ax]
            if periodic:
                d = (d + 0.5 * self.side_length) % self.side_length - 0.5 * self.side_length
            d2 = d2 + self.axis_view(d, ax) ** 2
        return d2


def make_grid(n: int, side_length: float, samples: int) -> TorusGrid:
    """Validate parameters and build a :class:`TorusGrid`.

    Raises
    ------
    InvalidGrid
        If ``samples`` is odd or below 4, ``side_length`` is not positive,
        or ``n`` is not a positive integer.
    """
    if int(n) != n or n < 1:
        raise InvalidGrid(f"dimension must be a positive integer, got {n!r}")
    if not np.isfinite(side_length) or side_length <= 0:
        raise InvalidGrid(f"side length must be positive, got {side_length!r}")
    if int(samples) != samples or samples < 4 or samples % 2:
        raise InvalidGrid(f"samples per axis must be an even integer >= 4, got {samples!r}")
    return TorusGrid(int(n), float(side_length), int(samples))


def _as_point(x, n: int) -> np.ndarray:
    p = np.atleast_1d(np.asarray(x, dtype=float))
    if p.size == 1 and n > 1:
        p = np.concatenate([p, np.zeros(n - 1)])
    if p.shape != (n,):
        raise ValueError(f"expected a point in R^{n}, got shape {p.shape}")
    return p


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Complex samples on a grid; the array is copied and made read-only."""

    grid: TorusGrid
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.complex128)
        if vals.size != self.grid.size:
            raise InvalidGrid(f"expected {self.grid.size} samples, got {vals.size}")
        object.__setattr__(self, "values", _frozen(vals.reshape(self.grid.shape)))

    @classmethod
    def from_callable(cls, grid: TorusGrid, func) -> "GridFunction":
        """Sample ``func(*coords)`` where coords broadcast over the grid."""
        axes = [grid.coordinate(ax) for ax in range(grid.n)]
        vals = np.broadcast_to(func(*axes), grid.shape)
        return cls(grid, vals)

    def norm_sq(self) -> float:
        return float(self.grid.cell_volume * np.sum(np.abs(self.values) ** 2))

    def scaled(self, s) -> "GridFunction":
        return GridFunction(self.grid, s * self.values)

    def __add__(self, other: "GridFunction") -> "GridFunction":
        _check_same(self.grid, other.grid)
        return GridFunction(self.grid, self.values + other.values)

    def __sub__(self, other: "GridFunction") -> "GridFunction":
        _check_same(self.grid, other.grid)
        return GridFunction(self.grid, self.values - other.values)


@dataclass(frozen=True, eq=False)
class SpectrumFunction:
    """Continuum-normalized Fourier coefficients, stored in FFT index order."""

    grid: TorusGrid
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=np.complex128)
        if c.size != self.grid.size:
            raise InvalidGrid(f"expected {self.grid.size} coefficients, got {c.size}")
        object.__setattr__(self, "coeffs", _frozen(c.reshape(self.grid.shape)))

    def energy(self) -> float:
        """Spectral energy (2 pi / side)^n sum |fhat|^2."""
        return float(self.grid.freq_step ** self.grid.n * np.sum(np.abs(self.coeffs) ** 2))

    def at(self, k: Sequence[int]) -> complex:
        """Coefficient at integer wavenumber tuple ``k``."""
        idx = tuple(int(ki) % self.grid.samples for ki in np.atleast_1d(k))
        return complex(self.coeffs[idx])


def _check_same(a: TorusGrid, b: TorusGrid) -> None:
    if a != b:
        raise GridMismatch(f"grids differ: {a} vs {b}")


def _check_finite(arr: np.ndarray) -> None:
    if not np.all(np.isfinite(arr)):
        raise NonFiniteInput("non-finite sample in input")


def forward_values(values: np.ndarray, grid: TorusGrid) -> np.ndarray:
    scale = grid.cell_volume * (2.0 * math.pi) ** (-0.5 * grid.n)
    return scale * grid.phase * sfft.fftn(values)


def inverse_values(coeffs: np.ndarray, grid: TorusGrid) -> np.ndarray:
    scale = grid.cell_volume * (2.0 * math.pi) ** (-0.5 * grid.n)
    return sfft.ifftn(grid.phase * coeffs) / scale


def transform(f, direction: str = "forward"):
    """Forward (GridFunction -> SpectrumFunction) or inverse transform.

    Parameters
    ----------
    f : GridFunction or SpectrumFunction
    direction : {"forward", "inverse"}
    """
    if direction == "forward":
        if not isinstance(f, GridFunction):
            raise TypeError("forward transform expects a GridFunction")
        _check_finite(f.values)
        return SpectrumFunction(f.grid, forward_values(f.values, f.grid))
    if direction == "inverse":
        if not isinstance(f, SpectrumFunction):
            raise TypeError("inverse transform expects a SpectrumFunction")
        _check_finite(f.coeffs)
        return GridFunction(f.grid, inverse_values(f.coeffs, f.grid))
    raise ValueError(f"unknown direction {direction!r}")


def _mask_array(mask, grid: TorusGrid) -> np.ndarray:
    if hasattr(mask, "grid"):
        _check_same(grid, mask.grid)
        return np.asarray(mask.values, dtype=bool)
    arr = np.asarray(mask, dtype=bool)
    if arr.shape != grid.shape:
        raise GridMismatch(f"mask shape {arr.shape} does not match grid {grid.shape}")
    return arr


def integrate(f: GridFunction, mask=None, integrand: str = "values"):
    """Riemann sum ``h^n * sum`` over (masked) cells.

    ``integrand="values"`` integrates f itself and returns a float when f is
    real valued (complex otherwise); ``"squared-modulus"`` integrates |f|^2.
    """
    vals = f.values
    if integrand == "squared-modulus":
        vals = np.abs(vals) ** 2
    elif integrand != "values":
        raise ValueError(f"unknown integrand {integrand!r}")
    if mask is not None:
        vals = np.where(_mask_array(mask, f.grid), vals, 0.0)
    total = f.grid.cell_volume * np.sum(vals)
    if np.iscomplexobj(total) and total.imag != 0.0:
        return complex(total)
    return float(np.real(total))


def multiplier(beta: Sequence[int], grid: TorusGrid) -> np.ndarray:
    """Symbol (i xi)^beta with the Nyquist index zeroed along differentiated axes."""
    beta = [int(b) for b in np.atleast_1d(beta)]
    if len(beta) != grid.n or min(beta) < 0:
        raise ValueError(f"multi-index {beta} invalid for dimension {grid.n}")
    sym = np.ones(grid.shape, dtype=np.complex128)
    nyq = grid.samples // 2
    for ax, b in enumerate(beta):
        if b == 0:
            continue
        xi = (1j * grid.freqs) ** b
        xi[nyq] = 0.0
        sym = sym * grid.axis_view(xi, ax)
    return sym


def spectral_derivative(f: GridFunction, beta: Sequence[int], max_order: int = MAX_DERIVATIVE_ORDER) -> GridFunction:
    """Inverse transform of (i xi)^beta fhat."""
    beta = np.atleast_1d(beta)
    if int(np.sum(beta)) > max_order:
        raise OrderTooHigh(f"|beta| = {int(np.sum(beta))} exceeds max order {max_order}")
    if not np.any(beta):
        return f
    _check_finite(f.values)
    vals = sfft.ifftn(multiplier(beta, f.grid) * sfft.fftn(f.values))
    return GridFunction(f.grid, vals)


def tail_fraction(f: GridFunction, shell: float = TAIL_SHELL) -> float:
    """Share of |f|^2 lying within ``shell*side`` of the box faces."""
    g = f.grid
    w = np.abs(f.values) ** 2
    total = np.sum(w)
    if total == 0:
        return 0.0
    inner = np.ones(g.shape, dtype=bool)
    edge = 0.5 * g.side_length - shell * g.side_length
    for ax in range(g.n):
        x = g.coordinate(ax)
        inner = inner & (np.abs(x) < edge)
    return float(np.sum(w[~inner]) / total)


def tail_ok(f: GridFunction, threshold: float = TAIL_THRESHOLD, shell: float = TAIL_SHELL) -> bool:
    """Boundary-tail monitor: True when the torus is an adequate proxy for R^n."""
    return tail_fraction(f, shell) < threshold


def as_values(f, grid: Optional[TorusGrid] = None) -> np.ndarray:
    """Raw sample array of a GridFunction (or array-like on ``grid``)."""
    if isinstance(f, GridFunction):
        if grid is not None:
            _check_same(grid, f.grid)
        return f.values
    return np.asarray(f, dtype=np.complex128).reshape(grid.shape)
