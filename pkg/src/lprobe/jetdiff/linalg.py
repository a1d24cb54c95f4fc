"""Finite-difference Hessians and a dense symmetric eigensolver."""

from __future__ import annotations

from typing import Callable

import numpy as np

from lprobe.errors import NumericalError


def hessian_fd(
    grad_fn: Callable[[np.ndarray], np.ndarray],
    theta,
    h: float | None = None,
) -> np.ndarray:
    """Central differences of ``grad_fn``, symmetrized.

    Column j is ``(g(theta + h_j e_j) - g(theta - h_j e_j)) / (2 h_j)``.  With
    ``h=None`` the step is ``1e-4 * max(1, |theta_j|)`` per coordinate.
    """
    theta = np.asarray(theta, dtype=float)
    n = theta.size
    if h is not None and not h > 0:
        raise ValueError(f"step size must be positive, got {h}")
    steps = (
        np.full(n, float(h)) if h is not None else 1e-4 * np.maximum(1.0, np.abs(theta))
    )
    H = np.empty((n, n))
    for j in range(n):
        e = np.zeros(n)
        e[j] = steps[j]
        col = (np.asarray(grad_fn(theta + e)) - np.asarray(grad_fn(theta - e))) / (
            2.0 * steps[j]
        )
        if not np.all(np.isfinite(col)):
            raise NumericalError(f"non-finite Hessian entries at coordinate {j}")
        H[:, j] = col
    return 0.5 * (H + H.T)


def _round_robin(n: int) -> list[list[tuple[int, int]]]:
    """Tournament schedule: n-1 rounds of disjoint pairs covering all pairs once."""
    m = n + (n % 2)
    players = list(range(m))
    rounds = []
    for _ in range(m - 1):
        pairs = []
        for k in range(m // 2):
            p, q = players[k], players[m - 1 - k]
            if p < n and q < n:
                pairs.append((min(p, q), max(p, q)))
        rounds.append(pairs)
        players = [players[0]] + [players[-1]] + players[1:-1]
    return rounds


def jacobi_eigh(
    A, tol: float = 1e-14, max_sweeps: int = 60
) -> tuple[np.ndarray, np.ndarray]:
    """Cyclic Jacobi eigen-decomposition of a symmetric matrix.

    Rotations are applied in round-robin order: each round annihilates a set
    of disjoint off-diagonal pairs at once, which vectorizes well.  Returns
    ``(eigenvalues, eigenvectors)`` unsorted, with ``A = V diag(w) V^T``.
    """
    A = np.array(A, dtype=float)
    n = A.shape[0]
    Vt = np.eye(n)
    if n == 1:
        return A.diagonal().copy(), Vt
    scale = np.linalg.norm(A)
    if scale == 0.0:
        return np.zeros(n), Vt
    schedule = [
        (np.array([p for p, _ in r]), np.array([q for _, q in r])) for r in _round_robin(n)
    ]
    prev = np.inf
    for _ in range(max_sweeps):
        off = np.linalg.norm(A - np.diag(np.diag(A)))
        # second test stops at the round-off floor
        if off <= tol * scale or off > 0.9 * prev:
            break
        prev = off
        for p, q in schedule:
            apq = A[p, q]
            app, aqq = A[p, p], A[q, q]
            with np.errstate(divide="ignore", invalid="ignore"):
                tau = (aqq - app) / (2.0 * apq)
                t = np.where(tau >= 0, 1.0, -1.0) / (np.abs(tau) + np.sqrt(1.0 + tau * tau))
            t = np.where(apq == 0.0, 0.0, t)
            c = 1.0 / np.sqrt(1.0 + t * t)
            s = (t * c)[:, None]
            c = c[:, None]
            # J[p,p]=J[q,q]=c, J[p,q]=s, J[q,p]=-s; A <- J^T A J done as two
            # row updates around a transpose (A stays symmetric).
            for M in (A, Vt):
                rp, rq = M[p], M[q]
                M[p], M[q] = c * rp - s * rq, s * rp + c * rq
            A = np.ascontiguousarray(A.T)
            rp, rq = A[p], A[q]
            A[p], A[q] = c * rp - s * rq, s * rp + c * rq
    return A.diagonal().copy(), Vt.T


def sym_eigenvalues(H, return_vectors: bool = False):
    """Eigenvalues of a symmetric matrix, sorted descending."""
    H = np.asarray(H, dtype=float)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {H.shape}")
    norm = np.linalg.norm(H)
    if np.max(np.abs(H - H.T), initial=0.0) > 1e-10 * max(norm, 1e-300):
        raise ValueError("matrix is not symmetric")
    w, V = jacobi_eigh(0.5 * (H + H.T))
    order = np.argsort(w)[::-1]
    if return_vectors:
        return w[order], V[:, order]
    return w[order]
