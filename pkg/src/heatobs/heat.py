"""Heat semigroup as an exact Fourier multiplier, plus closed-form Gaussians."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.fft as sfft

from .errors import InvalidTime
from .grid import GridFunction, TorusGrid, _as_point, _check_finite


def heat_kernel_eval(n: int, t: float, x) -> np.ndarray:
    """K(t, x) = (4 pi t)^(-n/2) exp(-|x|^2 / 4t).

    ``x`` may be a single point or an array whose last axis has length n.
    """
    if not t > 0:
        raise InvalidTime(f"heat kernel needs t > 0, got {t}")
    x = np.asarray(x, dtype=float)
    r2 = np.sum(x * x, axis=-1) if x.ndim and x.shape[-1] == n else x * x
    return (4 * math.pi * t) ** (-n / 2) * np.exp(-r2 / (4 * t))


def heat_symbol(grid: TorusGrid, t: float) -> np.ndarray:
    return np.exp(-t * grid.freq_sq)


def propagate_values(values: np.ndarray, grid: TorusGrid, t: float) -> np.ndarray:
    if t == 0:
        return values
    return sfft.ifftn(heat_symbol(grid, t) * sfft.fftn(values))


def propagate(u: GridFunction, t: float) -> GridFunction:
    """Exact torus heat flow e^{t Delta} u (each mode scaled by e^{-t|xi|^2})."""
    if t < 0 or not math.isfinite(t):
        raise InvalidTime(f"propagation time must be >= 0, got {t}")
    if t == 0:
        return u
    _check_finite(u.values)
    return GridFunction(u.grid, propagate_values(u.values, u.grid, t))


def propagate_many(u: GridFunction, times: Sequence[float]) -> np.ndarray:
    """Stack of e^{t_i Delta} u sample arrays, sharing one forward FFT."""
    if min(times) < 0:
        raise InvalidTime("propagation times must be >= 0")
    spec = sfft.fftn(u.values)
    out = np.empty((len(times),) + u.grid.shape, dtype=np.complex128)
    for i, t in enumerate(times):
        out[i] = sfft.ifftn(heat_symbol(u.grid, t) * spec)
    return out


def heat_kernel_quadrature(u0: GridFunction, t: float, targets) -> np.ndarray:
    """u(t, .) on the sub-box ``targets`` (per-axis index arrays) by quadrature of
    the heat-kernel convolution over the whole sample set, one axis at a time.

    All summands are positive for positive data, so tiny values keep full
    relative accuracy; the FFT propagator cannot resolve values below its
    round-off floor.  Real data only (the imaginary part is ignored).
    """
    if not t > 0:
        raise InvalidTime(f"kernel quadrature needs t > 0, got {t}")
    g = u0.grid
    x = g.coords
    out = u0.values.real
    for ax, idx in enumerate(targets):
        z = x[idx][:, None] - x[None, :]
        K = g.spacing * np.exp(-z * z / (4 * t)) / math.sqrt(4 * math.pi * t)
        out = np.moveaxis(np.tensordot(K, out, axes=([1], [ax])), 0, ax)
    return out


@dataclass(frozen=True)
class GaussianSolutionSpec:
    """v(t, x) = (4 pi (t+1))^(-n/2) exp(-|x - x0|^2 / 4(t+1))."""

    n: int
    center: tuple = ()

    def __post_init__(self):
        c = _as_point(self.center if len(self.center) else 0.0, self.n)
        object.__setattr__(self, "center", tuple(float(v) for v in c))


def gaussian_solution_eval(spec: GaussianSolutionSpec, t: float, x) -> np.ndarray:
    if t < 0:
        raise InvalidTime(f"t must be >= 0, got {t}")
    x = np.asarray(x, dtype=float)
    d = x - np.asarray(spec.center)
    r2 = np.sum(d * d, axis=-1)
    s = t + 1.0
    return (4 * math.pi * s) ** (-spec.n / 2) * np.exp(-r2 / (4 * s))


def gaussian_solution_grid(spec: GaussianSolutionSpec, grid: TorusGrid, t: float,
                           periodic: bool = False) -> GridFunction:
    """Sample v(t, .) on ``grid`` (plain Euclidean distance unless ``periodic``)."""
    if spec.n != grid.n:
        raise ValueError("dimension of solution and grid differ")
    if t < 0:
        raise InvalidTime(f"t must be >= 0, got {t}")
    s = t + 1.0
    r2 = grid.displacement_sq(spec.center, periodic=periodic)
    return GridFunction(grid, (4 * math.pi * s) ** (-grid.n / 2) * np.exp(-r2 / (4 * s)))


def gaussian_energy(n: int, t: float) -> float:
    """Closed form of the L^2 norm squared of v(t, .): (8 pi (t+1))^(-n/2)."""
    return (8 * math.pi * (t + 1.0)) ** (-n / 2)
