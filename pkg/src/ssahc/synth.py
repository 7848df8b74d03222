"""Seeded synthetic recordings: embedding sequences plus reference turns.

Speaker centroids share a recording-level direction and differ by random
offsets of size ``separation``, so two centroids have cosine close to
``1 / (1 + separation**2)``. Each window's embedding is the centroid of the
speaker talking at the window midpoint plus isotropic noise whose expected
norm is ``within_noise``. Windows that overlap share audio, so each window's
noise is the normalized sum of independent per-shift block noises it covers;
the marginal noise scale is unchanged.

Optionally each turn adds its own random offset of expected norm
``turn_noise`` (prosody and phonetic context shared inside a turn), and a
recording-specific nuisance subspace of rank ``nuisance_rank``
adds per-window variation of expected norm ``nuisance_scale`` that carries
no speaker information (channel and content variability). It dominates the
recording-level principal directions when large.

Interior turn boundaries are snapped to the points halfway between
consecutive window midpoints, which is where the segment-to-turn conversion
places hypothesis boundaries.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import Recording, SpeakerTurn


@dataclass(frozen=True)
class SynthSpec:
    num_speakers: int = 2
    duration: float = 60.0
    window: float = 1.5
    shift: float = 0.75
    mean_turn: float = 4.0
    separation: float = 2.0
    within_noise: float = 0.5
    dim: int = 32
    seed: int = 0
    recording_id: str = "synth"
    turn_noise: float = 0.0
    nuisance_rank: int = 0
    nuisance_scale: float = 0.0

    def __post_init__(self):
        if self.num_speakers < 1:
            raise ValueError("num_speakers must be >= 1")
        if not 0 < self.shift <= self.window:
            raise ValueError("need 0 < shift <= window")
        if self.duration < self.window:
            raise ValueError("duration must be at least one window")
        if not self.mean_turn > 0:
            raise ValueError("mean_turn must be > 0")
        if not self.separation > 0:
            raise ValueError("separation must be > 0")
        if self.within_noise < 0:
            raise ValueError("within_noise must be >= 0")
        if self.dim < 2:
            raise ValueError("dim must be >= 2")
        if self.turn_noise < 0:
            raise ValueError("turn_noise must be >= 0")
        if not 0 <= self.nuisance_rank <= self.dim:
            raise ValueError("nuisance_rank must be in 0..dim")
        if self.nuisance_scale < 0:
            raise ValueError("nuisance_scale must be >= 0")

    @property
    def num_segments(self) -> int:
        return int(math.floor((self.duration - self.window) / self.shift + 1e-9)) + 1


def _unit(rng, dim):
    v = rng.standard_normal(dim)
    return v / np.linalg.norm(v)


def _turn_bounds(spec: SynthSpec, rng) -> list[float]:
    """Turn boundaries from 0 to ``duration`` on the snapping grid."""
    n = spec.num_segments
    grid = (np.arange(n - 1) + 0.5) * spec.shift + spec.window / 2
    bounds = [0.0]
    g = 0
    while g < grid.size:
        target = bounds[-1] + rng.exponential(spec.mean_turn)
        # nearest grid point to target that lies past the previous boundary
        k = int(np.argmin(np.abs(grid[g:] - target)))
        g += k
        bounds.append(float(grid[g]))
        g += 1
    bounds.append(float(spec.duration))
    return bounds


def _speaker_sequence(spec: SynthSpec, n_turns: int, rng) -> list[int]:
    order = list(rng.permutation(spec.num_speakers))
    seq: list[int] = []
    for i in range(n_turns):
        if i < len(order):
            seq.append(int(order[i]))
        else:
            choice = int(rng.integers(0, spec.num_speakers - 1))
            seq.append(choice + (choice >= seq[-1]))
    return seq


def _block_noise(rng, n: int, dim: int, blocks: int) -> np.ndarray:
    e = rng.standard_normal((n + blocks - 1, dim))
    return sum(e[k:k + n] for k in range(blocks)) / math.sqrt(blocks)


def generate_recording(spec: SynthSpec) -> tuple[Recording, list[SpeakerTurn]]:
    rng = np.random.default_rng(spec.seed)
    base = _unit(rng, spec.dim)
    centroids = np.stack([base + spec.separation * _unit(rng, spec.dim)
                          for _ in range(spec.num_speakers)])
    centroids /= np.linalg.norm(centroids, axis=1, keepdims=True)

    if spec.num_speakers == 1:
        bounds = [0.0, float(spec.duration)]
    else:
        bounds = _turn_bounds(spec, rng)
    speakers = _speaker_sequence(spec, len(bounds) - 1, rng)
    if len(set(speakers)) < spec.num_speakers:
        raise ValueError(
            f"duration {spec.duration}s too short for {spec.num_speakers} speakers")

    n = spec.num_segments
    starts = np.arange(n) * spec.shift
    segments = np.stack([starts, starts + spec.window], axis=1)
    mids = starts + spec.window / 2
    owner_turn = np.searchsorted(np.array(bounds[1:-1]), mids, side="right")
    owner = np.array(speakers)[owner_turn]
    blocks = max(1, int(round(spec.window / spec.shift)))
    noise = _block_noise(rng, n, spec.dim, blocks) * (spec.within_noise / math.sqrt(spec.dim))
    emb = centroids[owner] + noise
    if spec.nuisance_rank > 0 and spec.nuisance_scale > 0:
        q, _ = np.linalg.qr(rng.standard_normal((spec.dim, spec.nuisance_rank)))
        coef = _block_noise(rng, n, spec.nuisance_rank, blocks)
        emb += coef @ q.T * (spec.nuisance_scale / math.sqrt(spec.nuisance_rank))
    if spec.turn_noise > 0:
        offsets = rng.standard_normal((len(speakers), spec.dim))
        emb += offsets[owner_turn] * (spec.turn_noise / math.sqrt(spec.dim))

    turns = [SpeakerTurn(spec.recording_id, f"S{s}", lo, hi - lo)
             for s, lo, hi in zip(speakers, bounds, bounds[1:])]
    return Recording(spec.recording_id, segments, emb), turns
