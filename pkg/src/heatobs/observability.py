"""Observability constants, interpolation exponents, and the telescoping schedule."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
import scipy.fft as sfft
import scipy.linalg as sla

from .constants import LogScalar, log_predicted_cobs
from .errors import (REGULARIZED, EmptyObservationSet, InvalidLambda, NotConverged,
                     ObservationVanishes, TooFewNodes, ZeroInput)
from .grid import GridFunction, _check_same
from .heat import propagate, propagate_many
from .linalg import EigEstimate, pcg
from .sets import IndicatorMask

DEFAULT_NODES = 64


@dataclass(frozen=True)
class TimeQuadrature:
    T: float
    nodes: np.ndarray
    weights: np.ndarray
    scheme: str

    def __post_init__(self):
        for name in ("nodes", "weights"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def integrate(self, values) -> float:
        return float(np.dot(self.weights, values))


def _weights(nodes: np.ndarray) -> np.ndarray:
    # trapezoid between nodes; [0, t_1] is charged to t_1
    w = np.empty_like(nodes)
    gaps = np.diff(nodes)
    w[0] = nodes[0] + 0.5 * gaps[0]
    w[1:-1] = 0.5 * (gaps[:-1] + gaps[1:])
    w[-1] = 0.5 * gaps[-1]
    return w


def time_quadrature(T: float, scheme: str = "trapezoid", K: int = DEFAULT_NODES,
                    first_fraction: float = 1e-3) -> TimeQuadrature:
    """Nodes in (0, T] with weights summing to T.

    ``trapezoid`` uses t_i = i T / K.  ``log-refined`` places K geometric nodes
    from ``first_fraction * T`` to T.
    """
    if K < 2:
        raise TooFewNodes(f"need at least 2 nodes, got {K}")
    if not T > 0:
        raise ValueError("T must be positive")
    if scheme == "trapezoid":
        nodes = T * np.arange(1, K + 1) / K
    elif scheme == "log-refined":
        nodes = T * np.geomspace(first_fraction, 1.0, K)
        nodes[-1] = T
    else:
        raise ValueError(f"unknown quadrature scheme {scheme!r}")
    return TimeQuadrature(T, nodes, _weights(nodes), scheme)


@dataclass(frozen=True)
class TimeWindowSet:
    """Finite union of disjoint closed subintervals of (0, T)."""

    intervals: Tuple[Tuple[float, float], ...]

    def __post_init__(self):
        iv = tuple(sorted((float(a), float(b)) for a, b in self.intervals))
        if not iv:
            raise ValueError("time window set is empty")
        for a, b in iv:
            if not a < b:
                raise ValueError(f"interval ({a}, {b}) has no length")
        for (_, b0), (a1, _) in zip(iv, iv[1:]):
            if a1 <= b0:
                raise ValueError("intervals must be disjoint")
        object.__setattr__(self, "intervals", iv)

    @property
    def length(self) -> float:
        return sum(b - a for a, b in self.intervals)

    def contains(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        return np.any([(t >= a) & (t <= b) for a, b in self.intervals], axis=0)


def restrict_quadrature(quad: TimeQuadrature, windows: TimeWindowSet) -> TimeQuadrature:
    """Drop nodes outside F (equivalently, zero their weights)."""
    keep = windows.contains(quad.nodes)
    if not np.any(keep):
        raise TooFewNodes("no quadrature node falls inside the time windows")
    return TimeQuadrature(quad.T, quad.nodes[keep], quad.weights[keep], quad.scheme + "+windows")


def obs_forms(u0: GridFunction, mask: IndicatorMask, T: float,
              quad: Optional[TimeQuadrature] = None) -> Tuple[float, float]:
    """(int |u(T)|^2, sum_i w_i int_E |u(t_i)|^2) for u = e^{t Delta} u0."""
    _check_same(u0.grid, mask.grid)
    if not np.any(u0.values):
        raise ZeroInput("initial datum is zero")
    quad = quad if quad is not None else time_quadrature(T)
    h = u0.grid.cell_volume
    q_num = propagate(u0, T).norm_sq()
    stack = propagate_many(u0, quad.nodes)
    per_node = h * np.sum(np.abs(stack[:, mask.values]) ** 2, axis=1)
    return q_num, quad.integrate(per_node)


class _Gramian:
    """A and B of the generalized problem in reduced, Jacobi-scaled coordinates.

    Coordinates are unitary-DFT coefficients y = D^{1/2} c, where D is the
    exact diagonal of B in the Fourier basis, so that diag(B_s) = 1.
    """

    def __init__(self, mask: IndicatorMask, T: float, quad: TimeQuadrature, mode_floor: float):
        g = mask.grid
        self.grid = g
        self.chi = mask.values.astype(float)
        xi2 = g.freq_sq.reshape(-1)
        rho = self.chi.mean()
        diag_all = rho * (quad.weights @ np.exp(-2.0 * np.outer(quad.nodes, xi2)))
        self.idx = np.flatnonzero(diag_all >= mode_floor * diag_all.max())
        self.dim = self.idx.size
        xr = xi2[self.idx]
        self.s = diag_all[self.idx] ** -0.5
        self.a = np.exp(-2.0 * T * xr) * self.s ** 2
        self.d = np.exp(-np.outer(quad.nodes, xr)) * self.s
        self.w = quad.weights
        self.shift = 0.0

    def B(self, v):
        g = self.grid
        full = np.zeros((self.w.size, g.size), dtype=np.complex128)
        full[:, self.idx] = self.d * v
        axes = tuple(range(1, g.n + 1))
        samples = sfft.ifftn(full.reshape((self.w.size,) + g.shape), axes=axes, norm="ortho")
        back = sfft.fftn(samples * self.chi, axes=axes, norm="ortho").reshape(self.w.size, -1)
        out = self.w @ (self.d * back[:, self.idx])
        return out + self.shift * v

    def to_samples(self, v):
        full = np.zeros(self.grid.size, dtype=np.complex128)
        full[self.idx] = v * self.s
        return sfft.ifftn(full.reshape(self.grid.shape), norm="ortho")


def obs_constant_estimate(mask: IndicatorMask, T: float, quad: Optional[TimeQuadrature] = None,
                          tol: float = 1e-8, seed: int = 0, max_krylov: int = 80,
                          cg_rtol: float = 1e-3, cg_maxiter: int = 100,
                          mode_floor: float = 1e-30, reg_factor: float = 1e-12) -> EigEstimate:
    """sup over u0 of int |u(T)|^2 / sum_i w_i int_E |u(t_i)|^2.

    Maximizes <A x, x>/<B x, x> with A = e^{2T Delta} and
    B = sum_i w_i e^{t_i Delta} chi_E e^{t_i Delta}.  Each step applies
    B^{-1} (by preconditioned CG) to the current residual A x - theta B x and
    a Rayleigh-Ritz step on the accumulated basis picks the next iterate.
    Fourier modes whose B-diagonal is below ``mode_floor`` times the largest
    are dropped; their numerator weight is far below round-off.

    Work is done in Jacobi-scaled coordinates (unit diagonal).  If a probed
    curvature of the scaled B falls below reg_factor * trace, that shift is
    added and the result carries REGULARIZED.
    """
    if mask.is_empty():
        raise EmptyObservationSet("observation mask is empty")
    quad = quad if quad is not None else time_quadrature(T)
    op = _Gramian(mask, T, quad, mode_floor)
    eps_reg = reg_factor * op.dim  # trace of the scaled Gramian
    flags = []
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(op.dim) + 1j * rng.standard_normal(op.dim)
    v[np.argmax(op.a)] += op.dim ** 0.5  # make sure the dominant mode is present
    V, BV = [], []
    theta_hist = []
    x = None
    res = np.inf
    converged = False
    it = 0
    for it in range(1, max_krylov + 1):
        for _ in range(2):
            for q in V:
                v = v - q * np.vdot(q, v)
        nv = np.linalg.norm(v)
        if nv < 1e-13:
            converged = True
            break
        v = v / nv
        V.append(v)
        BV.append(op.B(v) - op.shift * v)
        Vm = np.array(V)
        Bh = Vm.conj() @ np.array(BV).T
        Bh = 0.5 * (Bh + Bh.conj().T)
        Ah = (Vm.conj() * op.a) @ Vm.T
        Ah = 0.5 * (Ah + Ah.conj().T)
        bmin = sla.eigvalsh(Bh)[0]
        if bmin < eps_reg and op.shift == 0.0:
            op.shift = eps_reg
            if REGULARIZED not in flags:
                flags.append(REGULARIZED)
        Bh = Bh + op.shift * np.eye(len(V))
        evals, evecs = sla.eigh(Ah, Bh)
        theta = float(evals[-1])
        s = evecs[:, -1]
        x = s @ Vm
        # BV holds unshifted products; the shift enters here and in Bh
        bx = s @ np.array(BV) + op.shift * x
        r = op.a * x - theta * bx
        res = float(np.linalg.norm(r) / max(theta * np.linalg.norm(bx), 1e-300))
        theta_hist.append(theta)
        if len(theta_hist) >= 3:
            d1 = abs(theta_hist[-1] - theta_hist[-2])
            d2 = abs(theta_hist[-2] - theta_hist[-3])
            if max(d1, d2) <= tol * abs(theta):
                converged = True
                break
        sol = pcg(op.B, r, rtol=cg_rtol, maxiter=cg_maxiter)
        if sol.min_curvature < eps_reg and op.shift == 0.0:
            op.shift = eps_reg
            if REGULARIZED not in flags:
                flags.append(REGULARIZED)
        v = sol.x if np.linalg.norm(sol.x) > 0 else r
    if x is None:
        raise NotConverged("no Krylov vector could be built")
    if not converged:
        raise NotConverged(
            f"Rayleigh value not stationary after {it} steps",
            {"value": theta_hist[-1], "history": theta_hist[-5:], "residual": res},
        )
    return EigEstimate(value=theta_hist[-1], residual=res, iterations=it, converged=True,
                       eigenvalue=theta_hist[-1], method="krylov-cg", flags=tuple(flags),
                       vector=op.to_samples(x))


def interpolation_constant(u0: GridFunction, mask: IndicatorMask, T: float, theta: float) -> float:
    """Smallest C_Hold making the interpolation inequality an equality for u0.

    c = [ln int|u(T)|^2 - theta ln int_E|u(T)|^2 - (1-theta) ln int|u0|^2] / (1 + 1/T)
    """
    _check_same(u0.grid, mask.grid)
    if not 0 < theta < 1:
        raise ValueError("theta must lie in (0, 1)")
    if not np.any(u0.values):
        raise ZeroInput("initial datum is zero")
    uT = propagate(u0, T)
    h = u0.grid.cell_volume
    full = uT.norm_sq()
    obs = h * float(np.sum(np.abs(uT.values[mask.values]) ** 2))
    if obs <= 0:
        raise ObservationVanishes("int_E |u(T)|^2 vanishes")
    return (math.log(full) - theta * math.log(obs) - (1 - theta) * math.log(u0.norm_sq())) / (1 + 1 / T)


@dataclass(frozen=True)
class TelescopeSchedule:
    T: float
    lam: float
    l: float
    l1: float
    levels: Tuple[float, ...]
    mu: float
    c_prime: float
    c_hold: float

    @property
    def log_c_obs(self) -> float:
        """ln of 3 exp[2 C_Hold + mu C' / (l_1 - l_3)]."""
        return math.log(3.0) + 2 * self.c_hold + self.mu * self.c_prime / (self.levels[0] - self.levels[2])


def telescope_schedule(T: float, lam: float = math.sqrt(2.0 / 3.0), l: Optional[float] = None,
                       l1: Optional[float] = None, c_hold: float = 0.0, terms: int = 12) -> TelescopeSchedule:
    """Geometric levels l_{m+1} - l = lam^m (l_1 - l) and derived constants."""
    if not (1 / math.sqrt(2) < lam < 1):
        raise InvalidLambda(f"lambda must lie in (1/sqrt 2, 1), got {lam}")
    l = T / 3 if l is None else l
    l1 = 2 * T / 3 if l1 is None else l1
    if not (0 < l < l1 < T):
        raise ValueError("need 0 < l < l1 < T")
    if terms < 3:
        raise ValueError("need at least 3 levels")
    levels = tuple(l + lam ** m * (l1 - l) for m in range(terms))
    mu = 1.0 / (2.0 - lam ** -2)
    c_prime = 1 + lam + 2 * c_hold * (1 + lam) / lam
    return TelescopeSchedule(T, lam, l, l1, levels, mu, c_prime, c_hold)


def predicted_cobs(c_hold: float, T: float) -> LogScalar:
    """exp[36 (1 + 3 C_Hold)(1 + 1/T)], kept in log form; overflow is flagged."""
    return LogScalar(log_predicted_cobs(c_hold, T))
