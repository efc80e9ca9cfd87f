import numpy as np
import pytest
from hypothesis import given, strategies as st

from heatobs.errors import NotConverged
from heatobs.linalg import extreme_eig, lanczos_max, pcg, power_max


def _hermitian(seed, n):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return X @ X.conj().T / n


@given(st.integers(0, 10 ** 6), st.integers(5, 60))
def test_lanczos_top_eigenvalue(seed, n):
    A = _hermitian(seed, n)
    v0 = np.random.default_rng(seed + 1).standard_normal(n) + 0j
    theta, x, res, its, ok = lanczos_max(lambda v: A @ v, v0, tol=1e-10)
    assert ok
    assert theta == pytest.approx(np.linalg.eigvalsh(A)[-1], rel=1e-9)
    assert np.linalg.norm(A @ x - theta * x) <= 1e-9


def test_power_iteration_agrees():
    A = np.diag([1.0, 2.0, 5.0]) + 0j
    theta, *_ , ok = power_max(lambda v: A @ v, np.ones(3, complex), tol=1e-10)
    assert ok and theta == pytest.approx(5.0)


def test_extreme_eig_raises_with_diagnostics():
    A = np.diag(np.linspace(1.0, 1.0 + 1e-9, 400)) + 0j
    with pytest.raises(NotConverged) as info:
        extreme_eig(lambda v: A @ v, np.ones(400, complex), tol=1e-16, max_basis=4,
                    max_restarts=1, power_maxiter=5)
    assert "residual" in info.value.diagnostics


@given(st.integers(0, 10 ** 6), st.integers(3, 40))
def test_pcg_solves_spd(seed, n):
    A = _hermitian(seed, n) + np.eye(n)
    b = np.random.default_rng(seed).standard_normal(n) + 0j
    sol = pcg(lambda v: A @ v, b, rtol=1e-12, maxiter=10 * n)
    assert sol.converged
    assert np.linalg.norm(A @ sol.x - b) <= 1e-10 * np.linalg.norm(b)
    assert sol.min_curvature >= np.linalg.eigvalsh(A)[0] * (1 - 1e-9)


def test_pcg_with_preconditioner():
    d = np.linspace(1, 1e4, 50)
    b = np.ones(50, complex)
    sol = pcg(lambda v: d * v, b, precond=lambda r: r / d, rtol=1e-12)
    assert sol.iterations <= 2
    assert np.allclose(sol.x, 1 / d)
