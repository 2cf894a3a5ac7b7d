"""Jacobi sweeps with the off-diagonal row sum estimated by the row kernel."""
from __future__ import annotations

import numpy as np

from .errors import ValidationError
from .kernels import NormWindow, SignedTerm, normalize, row_kernel
from .statevector import ShotSampler


def poisson_matrix(N: int) -> np.ndarray:
    """tridiag(-1, 2, -1) of size N."""
    return 2.0 * np.eye(N) - np.eye(N, k=1) - np.eye(N, k=-1)


def jacobi_sweep(A: np.ndarray, b: np.ndarray, u: np.ndarray) -> np.ndarray:
    d = np.diag(A)
    off = A - np.diag(d)
    return (b - off @ u) / d


def quantum_jacobi_sweep(A, b, u, M: int, sampler: ShotSampler,
                         window: NormWindow = NormWindow(0.0, 1.0)):
    """One sweep; row i uses ``sampler.child(i)``.

    Returns ``(u_new, std_error)`` per node. Values are mapped into [0, 1]
    through `window` so that the off-diagonal sum splits into an exact
    offset and a sampled part.
    """
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    u = np.asarray(u, dtype=float)
    d = np.diag(A)
    if np.any(d == 0):
        raise ValidationError("Jacobi needs a nonzero diagonal")
    v = normalize(u, window)
    new = np.empty_like(u)
    se = np.zeros_like(u)
    for i in range(len(u)):
        cols = [j for j in range(len(u)) if j != i and A[i, j] != 0]
        offset = window.u_min * sum(A[i, j] for j in cols)
        sampled = 0.0
        if cols:
            row = [SignedTerm(A[i, j], float(v[j])) for j in cols]
            res = row_kernel(row, M, sampler.child(i))
            sampled = window.width * res.estimate
            se[i] = window.width * res.std_error / abs(d[i])
        new[i] = (b[i] - offset - sampled) / d[i]
    return new, se
