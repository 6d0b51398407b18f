"""Reference computations that share no code with the package under test."""

from __future__ import annotations

import numpy as np
from scipy.linalg import eigvalsh, expm, ldl


def dense_operator(x: np.ndarray, v: np.ndarray, lam: float) -> np.ndarray:
    """-d²/dx² + v - lam on interior nodes with Dirichlet ends, built from scratch."""
    h = x[1] - x[0]
    n = x.size - 2
    main = 2.0 / h**2 + v[1:-1] - lam
    return np.diag(main) - np.diag(np.full(n - 1, 1.0 / h**2), 1) - np.diag(np.full(n - 1, 1.0 / h**2), -1)


def lowest_dense(x, v, lam, k):
    return eigvalsh(dense_operator(x, v, lam))[:k]


def inertia_below(matrix: np.ndarray, level: float) -> int:
    """Negative inertia of matrix - level·I from an LDLᵀ factorisation (Sylvester)."""
    _, d, _ = ldl(matrix - level * np.eye(matrix.shape[0]))
    # D has 1x1 and 2x2 blocks; its eigenvalues carry the inertia
    return int(np.sum(eigvalsh(d) < 0))


def duhamel_expm(x, v, lam, u0, g, t):
    """S(t)u0 + ∫_0^t S(t-τ)g dτ via the exponential of an augmented matrix."""
    a = dense_operator(x, v, lam)
    n = a.shape[0]
    big = np.zeros((n + 1, n + 1))
    big[:n, :n] = -a
    big[:n, n] = g[1:-1]
    state = expm(t * big) @ np.concatenate([u0[1:-1], [1.0]])
    out = np.zeros_like(x)
    out[1:-1] = state[:n]
    return out


def harmonic_levels(k: int) -> np.ndarray:
    return 2.0 * np.arange(k) + 1.0


def poschl_teller_levels(depth_index: int = 2) -> np.ndarray:
    """Bound states of -ℓ(ℓ+1) sech²x: -(ℓ - j)² for j < ℓ."""
    ell = depth_index
    return -np.array([(ell - j) ** 2 for j in range(ell)], dtype=float)
