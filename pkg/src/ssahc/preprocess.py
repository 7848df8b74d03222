"""Global whitening, length normalization and recording-level PCA."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import ParseError, Recording, atomic_write_text

WHITEN_EIG_FLOOR = 1e-10
NORM_EPS = 1e-12


class DegenerateVectorError(ValueError):
    pass


def _sign_fix(rows: np.ndarray) -> np.ndarray:
    """Flip each row so its largest-magnitude entry (first on ties) is positive."""
    rows = rows.copy()
    idx = np.argmax(np.abs(rows), axis=1)
    signs = np.sign(rows[np.arange(rows.shape[0]), idx])
    signs[signs == 0] = 1.0
    return rows * signs[:, None]


@dataclass(frozen=True)
class WhiteningTransform:
    mean: np.ndarray  # (D,)
    matrix: np.ndarray  # (D, D)

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    def apply(self, x: np.ndarray) -> np.ndarray:
        return (np.asarray(x, dtype=np.float64) - self.mean) @ self.matrix.T

    @classmethod
    def identity(cls, dim: int) -> "WhiteningTransform":
        return cls(np.zeros(dim), np.eye(dim))

    def save(self, path) -> None:
        """Text cache: ``D``, then the mean row, then the D rows of the matrix."""
        lines = [str(self.dim), " ".join(repr(float(v)) for v in self.mean)]
        lines += [" ".join(repr(float(v)) for v in row) for row in self.matrix]
        atomic_write_text(path, "\n".join(lines) + "\n")

    @classmethod
    def load(cls, path) -> "WhiteningTransform":
        with open(path) as f:
            rows = [ln.split() for ln in f if ln.strip()]
        try:
            d = int(rows[0][0])
            vals = np.array([[float(t) for t in r] for r in rows[1:]])
        except (IndexError, ValueError) as e:
            raise ParseError(path, None, f"bad whitening file ({e})") from None
        if vals.shape != (d + 1, d):
            raise ParseError(path, None, f"expected {d + 1} rows of {d} values")
        return cls(vals[0], vals[1:])


@dataclass(frozen=True)
class PcaTransform:
    basis: np.ndarray  # (d, D), orthonormal rows
    eigenvalues: np.ndarray  # (d,), descending

    @property
    def dim(self) -> int:
        return self.basis.shape[0]


def compute_whitening(background) -> WhiteningTransform:
    """Fit ``W = L^-1/2 U^T`` from the eigendecomposition of the sample covariance.

    Eigenvalues below ``WHITEN_EIG_FLOOR`` are floored before inversion, so
    rank-deficient data whitens only on its support.
    """
    x = np.asarray(background, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 2:
        raise ValueError("whitening needs at least 2 background vectors")
    mu = x.mean(axis=0)
    cov = np.cov(x, rowvar=False, ddof=1).reshape(x.shape[1], x.shape[1])
    evals, evecs = np.linalg.eigh(cov)
    order = np.argsort(-evals, kind="stable")
    evals = np.maximum(evals[order], WHITEN_EIG_FLOOR)
    rows = _sign_fix(evecs[:, order].T)
    w = rows / np.sqrt(evals)[:, None]
    return WhiteningTransform(mu, w)


def length_normalize(v) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    n = np.linalg.norm(v)
    if not n > NORM_EPS:
        raise DegenerateVectorError("cannot length-normalize a near-zero vector")
    return v / n


def length_normalize_rows(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    norms = np.linalg.norm(x, axis=1)
    bad = np.flatnonzero(~(norms > NORM_EPS))
    if bad.size:
        raise DegenerateVectorError(f"row {bad[0]} has near-zero norm")
    return x / norms[:, None]


def compute_pca(rows, d: int) -> PcaTransform:
    """Top-``d`` principal directions of the mean-centred rows.

    Requested dimensions beyond the data rank come from the null space of the
    covariance; they are still orthonormal but carry no variance.
    """
    x = np.asarray(rows, dtype=np.float64)
    n, dim = x.shape
    if not 1 <= d <= dim:
        raise ValueError(f"PCA dimension {d} out of range 1..{dim}")
    xc = x - x.mean(axis=0)
    cov = xc.T @ xc / max(n - 1, 1)
    evals, evecs = np.linalg.eigh(cov)
    order = np.argsort(-evals, kind="stable")[:d]
    basis = _sign_fix(evecs[:, order].T)
    return PcaTransform(basis, evals[order])


def whiten_normalize(recording: Recording, whitening: WhiteningTransform) -> np.ndarray:
    if whitening.dim != recording.dim:
        raise ValueError(
            f"whitening has dimension {whitening.dim}, recording {recording.dim}")
    return length_normalize_rows(whitening.apply(recording.embeddings))


def fit_recording_pca(recording: Recording, whitening: WhiteningTransform,
                      d: int) -> PcaTransform:
    return compute_pca(whiten_normalize(recording, whitening), d)


def baseline_project(recording: Recording, whitening: WhiteningTransform,
                     d: int) -> np.ndarray:
    """Whiten, length-normalize and project onto the recording's own PCA basis."""
    u = whiten_normalize(recording, whitening)
    pca = compute_pca(u, d)
    return u @ pca.basis.T
