"""Matrix-free Hermitian eigen and linear solvers.

All routines act on flat complex vectors through a user supplied ``matvec``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import NotConverged


@dataclass(frozen=True)
class EigEstimate:
    """Result of an extreme-eigenvalue computation.

    ``value`` is the quantity of interest (a constant, possibly a transformed
    eigenvalue); ``eigenvalue`` is the raw Rayleigh value it came from.
    ``residual`` is ||A x - lambda x|| / ||x|| or its generalized analogue.
    """

    value: float
    residual: float
    iterations: int
    converged: bool
    eigenvalue: float = float("nan")
    method: str = ""
    flags: tuple = ()
    vector: np.ndarray = None


def _orthogonalize(w, basis, k):
    # two passes of classical Gram-Schmidt keep the basis orthonormal to round-off
    for _ in range(2):
        if k:
            V = basis[:k]
            w = w - V.T @ (V.conj() @ w)
    return w


def lanczos_max(matvec, v0, tol=1e-8, max_basis=200, max_restarts=30):
    """Largest eigenpair of a Hermitian operator by Lanczos with full reorthogonalization.

    Restarts explicitly from the current Ritz vector when the basis cap is
    reached.  Convergence is declared on the explicit residual.

    Returns
    -------
    (theta, x, residual, iterations, converged)
    """
    dim = v0.size
    m_cap = max(2, min(dim, max_basis))
    x = v0 / np.linalg.norm(v0)
    total = 0
    theta, res = -np.inf, np.inf
    for _ in range(max_restarts + 1):
        V = np.zeros((m_cap, dim), dtype=np.complex128)
        alpha = np.zeros(m_cap)
        beta = np.zeros(m_cap)
        V[0] = x
        k = 0
        w_prev = None
        while True:
            w = matvec(V[k])
            total += 1
            alpha[k] = np.real(np.vdot(V[k], w))
            w = _orthogonalize(w, V, k + 1)
            b = np.linalg.norm(w)
            done = k + 1 >= m_cap or b <= 1e-14 * max(1.0, abs(alpha[k]))
            # cheap Ritz check every few steps and at the end
            if done or (k + 1) % 5 == 0:
                evals, evecs = sla.eigh_tridiagonal(alpha[: k + 1], beta[:k]) if k else (alpha[:1], np.ones((1, 1)))
                theta = evals[-1]
                s = evecs[:, -1]
                est = b * abs(s[-1])
                if done or est <= 0.1 * tol:
                    break
            if b == 0:
                break
            beta[k] = b
            V[k + 1] = w / b
            k += 1
        x = s @ V[: k + 1]
        x = x / np.linalg.norm(x)
        ax = matvec(x)
        total += 1
        theta = float(np.real(np.vdot(x, ax)))
        res = float(np.linalg.norm(ax - theta * x))
        if res <= tol:
            return theta, x, res, total, True
    return theta, x, res, total, False


def power_max(matvec, v0, tol=1e-8, maxiter=20000):
    """Plain power iteration for the top of a Hermitian PSD operator."""
    x = v0 / np.linalg.norm(v0)
    theta, res = 0.0, np.inf
    for it in range(1, maxiter + 1):
        ax = matvec(x)
        theta = float(np.real(np.vdot(x, ax)))
        res = float(np.linalg.norm(ax - theta * x))
        if res <= tol:
            return theta, x, res, it, True
        nrm = np.linalg.norm(ax)
        if nrm == 0:
            return 0.0, x, 0.0, it, True
        x = ax / nrm
    return theta, x, res, maxiter, False


def extreme_eig(matvec, v0, tol=1e-8, max_basis=200, max_restarts=30, power_maxiter=20000):
    """Lanczos first, power iteration as fallback.

    Raises
    ------
    NotConverged
        If neither method reaches ``tol``; diagnostics carry the best estimate.
    """
    theta, x, res, its, ok = lanczos_max(matvec, v0, tol, max_basis, max_restarts)
    method = "lanczos"
    if not ok:
        t2, x2, r2, i2, ok2 = power_max(matvec, x, tol, power_maxiter)
        its += i2
        method = "power"
        if ok2 or r2 < res:
            theta, x, res, ok = t2, x2, r2, ok2
    if not ok:
        raise NotConverged(
            f"eigen solver stopped at residual {res:.3e} > {tol:.1e}",
            {"eigenvalue": theta, "residual": res, "iterations": its, "method": method},
        )
    return theta, x, res, its, method


@dataclass(frozen=True)
class CGResult:
    x: np.ndarray
    iterations: int
    converged: bool
    rel_residual: float
    min_curvature: float


def pcg(matvec, b, precond=None, x0=None, rtol=1e-10, maxiter=500):
    """Preconditioned conjugate gradients for a Hermitian positive operator.

    ``min_curvature`` is the smallest p^H A p / p^H p seen, a cheap probe of
    near-singularity.
    """
    x = np.zeros_like(b) if x0 is None else x0.copy()
    r = b - matvec(x) if x0 is not None else b.copy()
    bn = np.linalg.norm(b)
    if bn == 0:
        return CGResult(x, 0, True, 0.0, np.inf)
    z = precond(r) if precond is not None else r
    p = z.copy()
    rz = np.real(np.vdot(r, z))
    min_curv = np.inf
    for it in range(1, maxiter + 1):
        ap = matvec(p)
        pap = np.real(np.vdot(p, ap))
        pp = np.real(np.vdot(p, p))
        if pp > 0:
            min_curv = min(min_curv, pap / pp)
        if pap <= 0:
            return CGResult(x, it, False, float(np.linalg.norm(r) / bn), min_curv)
        a = rz / pap
        x = x + a * p
        r = r - a * ap
        rel = np.linalg.norm(r) / bn
        if rel <= rtol:
            return CGResult(x, it, True, float(rel), min_curv)
        z = precond(r) if precond is not None else r
        rz_new = np.real(np.vdot(r, z))
        p = z + (rz_new / rz) * p
        rz = rz_new
    return CGResult(x, maxiter, False, float(np.linalg.norm(r) / bn), min_curv)
