"""Cosine affinity between vectors and clusters, and affinity fusion."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .preprocess import NORM_EPS, DegenerateVectorError


def cosine_similarity(a, b) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if not (na > NORM_EPS and nb > NORM_EPS):
        raise DegenerateVectorError("cosine similarity of a near-zero vector")
    return float(np.clip(a @ b / (na * nb), -1.0, 1.0))


def pairwise_affinity(y) -> np.ndarray:
    """Cosine affinity matrix of the rows of ``y``.

    Exactly symmetric with a unit diagonal.
    """
    y = np.asarray(y, dtype=np.float64)
    norms = np.linalg.norm(y, axis=1)
    bad = np.flatnonzero(~(norms > NORM_EPS))
    if bad.size:
        raise DegenerateVectorError(f"row {bad[0]} has near-zero norm")
    u = y / norms[:, None]
    a = np.clip(u @ u.T, -1.0, 1.0)
    a = np.triu(a, 1)
    a = a + a.T
    np.fill_diagonal(a, 1.0)
    return a


def cluster_affinity(ci: Sequence[int], cj: Sequence[int], a: np.ndarray) -> float:
    """Average-linkage affinity: mean of ``a[x, y]`` over ``x in ci, y in cj``."""
    ci, cj = list(ci), list(cj)
    if not ci or not cj:
        raise ValueError("clusters must be non-empty")
    if set(ci) & set(cj):
        raise ValueError("clusters must be disjoint")
    # fixed summation order so the result is exactly symmetric
    if min(cj) < min(ci):
        ci, cj = cj, ci
    return float(np.mean(a[np.ix_(ci, cj)]))


def check_affinity(a, tol: float = 1e-12) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
        raise ValueError("affinity matrix must be square and non-empty")
    if not np.all(np.isfinite(a)):
        raise ValueError("affinity matrix has non-finite entries")
    if np.max(np.abs(a - a.T)) > tol:
        raise ValueError("affinity matrix is not symmetric")
    if np.any(np.abs(a) > 1 + tol):
        raise ValueError("affinity entries must lie in [-1, 1]")
    return a


def fuse_affinities(a1, a2) -> np.ndarray:
    """Elementwise mean of two affinity matrices."""
    a1 = np.asarray(a1, dtype=np.float64)
    a2 = np.asarray(a2, dtype=np.float64)
    if a1.shape != a2.shape:
        raise ValueError(f"shape mismatch: {a1.shape} vs {a2.shape}")
    return (a1 + a2) / 2.0
