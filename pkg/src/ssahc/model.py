"""Domain types shared across the package, plus XVEC and RTTM file I/O.

XVEC is a plain-text embedding format::

    <recording_id> <N_r> <D>
    <start_sec> <end_sec> <v_1> ... <v_D>      (N_r rows)

RTTM rows are the usual 10-field ``SPEAKER`` lines.
"""

from __future__ import annotations

import math
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np


class ParseError(ValueError):
    """Malformed input file. ``line`` is 1-based when known."""

    def __init__(self, path, line: Optional[int], message: str):
        self.path = str(path)
        self.line = line
        where = f"{self.path}:{line}" if line is not None else self.path
        super().__init__(f"{where}: {message}")


def _frozen(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class Recording:
    id: str
    segments: np.ndarray  # (N_r, 2) start/end seconds
    embeddings: np.ndarray  # (N_r, D)

    def __post_init__(self):
        seg = np.array(self.segments, dtype=np.float64).reshape(-1, 2)
        emb = np.array(self.embeddings, dtype=np.float64)
        if emb.ndim != 2 or emb.shape[0] < 1:
            raise ValueError("embeddings must be a non-empty 2-D matrix")
        if seg.shape[0] != emb.shape[0]:
            raise ValueError(
                f"{seg.shape[0]} segments but {emb.shape[0]} embedding rows")
        if not np.all(np.isfinite(emb)) or not np.all(np.isfinite(seg)):
            raise ValueError("non-finite value in recording")
        if np.any(seg[:, 0] < 0):
            raise ValueError("segment start must be >= 0")
        if np.any(seg[:, 1] <= seg[:, 0]):
            raise ValueError("segment end must exceed start")
        if np.any(np.diff(seg[:, 0]) < 0):
            raise ValueError("segments must be ordered by start time")
        object.__setattr__(self, "segments", _frozen(seg))
        object.__setattr__(self, "embeddings", _frozen(emb))

    @property
    def num_segments(self) -> int:
        return self.embeddings.shape[0]

    @property
    def dim(self) -> int:
        return self.embeddings.shape[1]


@dataclass(frozen=True)
class ClusterState:
    """Per-segment cluster labels, densely numbered ``0..num_clusters-1``."""

    labels: np.ndarray

    def __post_init__(self):
        lab = np.array(self.labels, dtype=np.int64).reshape(-1)
        if lab.size == 0:
            raise ValueError("labels must be non-empty")
        if lab.min() < 0:
            raise ValueError("labels must be non-negative")
        present = np.unique(lab)
        if present.size != lab.max() + 1:
            raise ValueError("labels must cover 0..N-1 with no empty cluster")
        object.__setattr__(self, "labels", _frozen(lab))

    @property
    def num_clusters(self) -> int:
        return int(self.labels.max()) + 1

    def clusters(self) -> list[list[int]]:
        """Member indices of each cluster, in label order."""
        out: list[list[int]] = [[] for _ in range(self.num_clusters)]
        for i, z in enumerate(self.labels):
            out[z].append(i)
        return out

    @classmethod
    def from_clusters(cls, clusters: Sequence[Sequence[int]], n: int) -> "ClusterState":
        """Build a state whose labels are numbered by first occurrence."""
        lab = np.full(n, -1, dtype=np.int64)
        for k, members in enumerate(clusters):
            lab[list(members)] = k
        if np.any(lab < 0):
            raise ValueError("clusters do not cover every segment")
        return cls(renumber(lab))

    @classmethod
    def singletons(cls, n: int) -> "ClusterState":
        return cls(np.arange(n))


def renumber(labels) -> np.ndarray:
    """Relabel densely 0..K-1 in order of first occurrence."""
    mapping: dict[int, int] = {}
    out = np.empty(len(labels), dtype=np.int64)
    for i, z in enumerate(labels):
        z = int(z)
        if z not in mapping:
            mapping[z] = len(mapping)
        out[i] = mapping[z]
    return out


@dataclass(frozen=True)
class SpeakerTurn:
    recording_id: str
    speaker: str
    onset: float
    duration: float

    def __post_init__(self):
        if not self.onset >= 0:
            raise ValueError(f"turn onset must be >= 0, got {self.onset}")
        if not self.duration > 0:
            raise ValueError(f"turn duration must be > 0, got {self.duration}")

    @property
    def end(self) -> float:
        return self.onset + self.duration


@dataclass(frozen=True)
class Hyperparams:
    """Settings of the self-supervised clustering loop.

    ``target_speakers`` set means the number of speakers is known; otherwise
    the final merge stage stops on ``stop_threshold``.
    """

    lam: float = 0.1
    gamma: float = 0.5
    eta: float = 0.5
    k_c: int = 1
    init_threshold: float = 0.1
    stop_threshold: float = 0.0
    target_speakers: Optional[int] = None
    learning_rate: float = 0.001
    max_epochs: int = 50
    num_iterations: int = 2
    pca_dim: int = 10
    seed: int = 0

    def __post_init__(self):
        if not self.lam >= 0:
            raise ValueError("lambda must be >= 0")
        if not self.gamma >= 0:
            raise ValueError("gamma must be >= 0")
        if not 0 < self.eta <= 1:
            raise ValueError("eta must be in (0, 1]")
        if self.k_c < 1:
            raise ValueError("k_c must be >= 1")
        if self.target_speakers is not None and self.target_speakers < 1:
            raise ValueError("target_speakers must be >= 1")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be > 0")
        if self.max_epochs < 0:
            raise ValueError("max_epochs must be >= 0")
        if self.num_iterations < 1:
            raise ValueError("num_iterations must be >= 1")
        if self.pca_dim < 1:
            raise ValueError("pca_dim must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        for name in ("lam", "gamma", "eta", "init_threshold", "stop_threshold",
                     "learning_rate"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")


# ---------------------------------------------------------------------------
# file I/O


def atomic_write_text(path, text: str) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", newline="\n") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_embeddings(path) -> Recording:
    """Parse an XVEC file into a :class:`Recording`."""
    with open(path) as f:
        lines = f.read().splitlines()
    rows = [(i + 1, ln.split()) for i, ln in enumerate(lines) if ln.strip()]
    if not rows:
        raise ParseError(path, 1, "empty file")
    lineno, header = rows[0]
    if len(header) != 3:
        raise ParseError(path, lineno, "header must be '<id> <N_r> <D>'")
    rec_id = header[0]
    try:
        n, d = int(header[1]), int(header[2])
    except ValueError:
        raise ParseError(path, lineno, "N_r and D must be integers") from None
    if n < 1 or d < 1:
        raise ParseError(path, lineno, "N_r and D must be positive")
    body = rows[1:]
    if len(body) != n:
        at = body[n][0] if len(body) > n else (body[-1][0] + 1 if body else lineno + 1)
        raise ParseError(path, at, f"expected {n} data rows, found {len(body)}")
    segs = np.empty((n, 2))
    emb = np.empty((n, d))
    prev_start = -math.inf
    for k, (lineno, toks) in enumerate(body):
        if len(toks) != d + 2:
            raise ParseError(path, lineno, f"expected {d + 2} values, found {len(toks)}")
        try:
            vals = [float(t) for t in toks]
        except ValueError as e:
            raise ParseError(path, lineno, f"non-numeric token ({e})") from None
        if not all(math.isfinite(v) for v in vals):
            raise ParseError(path, lineno, "non-finite value")
        start, end = vals[0], vals[1]
        if start < 0:
            raise ParseError(path, lineno, "start must be >= 0")
        if end <= start:
            raise ParseError(path, lineno, "end must exceed start")
        if start < prev_start:
            raise ParseError(path, lineno, "segments must be ordered by start")
        prev_start = start
        segs[k] = (start, end)
        emb[k] = vals[2:]
    return Recording(rec_id, segs, emb)


def format_embeddings(rec: Recording) -> str:
    out = [f"{rec.id} {rec.num_segments} {rec.dim}"]
    for (s, e), v in zip(rec.segments, rec.embeddings):
        out.append(" ".join(repr(float(x)) for x in (s, e, *v)))
    return "\n".join(out) + "\n"


def write_embeddings(rec: Recording, path) -> None:
    """Write ``rec`` as XVEC; floats use shortest round-trip repr."""
    atomic_write_text(path, format_embeddings(rec))


def read_rttm(path) -> list[SpeakerTurn]:
    turns = []
    with open(path) as f:
        for lineno, line in enumerate(f, 1):
            toks = line.split()
            if not toks or toks[0] != "SPEAKER":
                continue
            if len(toks) < 8:
                raise ParseError(path, lineno, "SPEAKER line needs at least 8 fields")
            try:
                onset, dur = float(toks[3]), float(toks[4])
                turns.append(SpeakerTurn(toks[1], toks[7], onset, dur))
            except ValueError as e:
                raise ParseError(path, lineno, str(e)) from None
    return turns


def format_rttm(turns: Iterable[SpeakerTurn]) -> str:
    return "".join(
        f"SPEAKER {t.recording_id} 1 {t.onset:.3f} {t.duration:.3f} "
        f"<NA> <NA> {t.speaker} <NA> <NA>\n"
        for t in turns
    )


def write_rttm(turns: Iterable[SpeakerTurn], path) -> None:
    atomic_write_text(path, format_rttm(turns))


def read_matrix(path) -> np.ndarray:
    """Read a square matrix file: ``N`` on the first line, then N rows."""
    with open(path) as f:
        rows = [(i + 1, ln.split()) for i, ln in enumerate(f) if ln.strip()]
    if not rows or len(rows[0][1]) != 1:
        raise ParseError(path, 1, "first line must hold the matrix size N")
    try:
        n = int(rows[0][1][0])
    except ValueError:
        raise ParseError(path, 1, "N must be an integer") from None
    if n < 1 or len(rows) - 1 != n:
        raise ParseError(path, 1, f"expected {n} matrix rows, found {len(rows) - 1}")
    out = np.empty((n, n))
    for k, (lineno, toks) in enumerate(rows[1:]):
        if len(toks) != n:
            raise ParseError(path, lineno, f"expected {n} values, found {len(toks)}")
        try:
            out[k] = [float(t) for t in toks]
        except ValueError as e:
            raise ParseError(path, lineno, f"non-numeric token ({e})") from None
    return out


def write_matrix(m: np.ndarray, path) -> None:
    m = np.asarray(m, dtype=np.float64)
    lines = [str(m.shape[0])]
    lines += [" ".join(repr(float(x)) for x in row) for row in m]
    atomic_write_text(path, "\n".join(lines) + "\n")
