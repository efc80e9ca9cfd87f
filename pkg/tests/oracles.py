"""Independent dense reference computations used by several test files.

Everything is assembled from explicit complex exponentials, so the FFT-based
code paths in the package are not reused.
"""
import math

import numpy as np
import scipy.linalg as sla


def lattice(grid):
    k = np.arange(-grid.samples // 2, grid.samples // 2)
    return 2 * math.pi * k / grid.side_length


def fourier_columns(grid, keep=None):
    """Orthonormal columns e^{i xi . x} / sqrt(M^n) for lattice frequencies xi (optionally filtered)."""
    xi1 = lattice(grid)
    freqs = np.array(np.meshgrid(*([xi1] * grid.n), indexing="ij")).reshape(grid.n, -1).T
    if keep is not None:
        freqs = freqs[keep(freqs)]
    pts = np.array(np.meshgrid(*([grid.coords] * grid.n), indexing="ij")).reshape(grid.n, -1).T
    return np.exp(1j * pts @ freqs.T) / math.sqrt(grid.size), freqs


def dense_spectral_constant(mask, N):
    E, _ = fourier_columns(mask.grid, keep=lambda f: np.sum(f * f, axis=1) <= N * N * (1 + 1e-14))
    chi = mask.values.reshape(-1).astype(float)
    A = E.conj().T @ (chi[:, None] * E)
    return 1.0 / sla.eigvalsh(A)[0]


def dense_obs_constant(mask, T, quad):
    E, freqs = fourier_columns(mask.grid)
    xi2 = np.sum(freqs * freqs, axis=1)
    chi = mask.values.reshape(-1).astype(float)
    G = E.conj().T @ (chi[:, None] * E)
    B = np.zeros_like(G)
    for t, w in zip(quad.nodes, quad.weights):
        d = np.exp(-t * xi2)
        B += w * (d[:, None] * G * d[None, :])
    a = np.exp(-2 * T * xi2)
    # whiten B on its numerically nonzero range; the null directions carry A ~ 0 too
    lam, U = sla.eigh(B)
    keep = lam > 1e-13 * lam[-1]
    W = U[:, keep] / np.sqrt(lam[keep])
    return float(sla.eigvalsh(W.conj().T @ (a[:, None] * W))[-1])
