"""Per-recording self-supervised AHC: initialize, then alternate training and merging."""

from __future__ import annotations

import json
import math
import zlib
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .affinity import pairwise_affinity
from .ahc import MergeStep, ahc_cluster
from .model import ClusterState, Hyperparams, Recording, SpeakerTurn
from .preprocess import (WhiteningTransform, baseline_project, compute_pca,
                         compute_whitening, whiten_normalize)
from .replearn import NetworkParams, forward, init_network, train


class ConfigurationError(ValueError):
    pass


@dataclass
class IterationSummary:
    iteration: int
    num_clusters: int
    epochs: int
    merges: int
    loss_initial: Optional[float] = None
    loss_final: Optional[float] = None


@dataclass
class DiarizationResult:
    recording_id: str
    state: ClusterState
    representations: np.ndarray
    affinity: np.ndarray
    turns: list[SpeakerTurn]
    iterations: list[IterationSummary] = field(default_factory=list)
    merges: list[MergeStep] = field(default_factory=list)
    # (iteration, epoch, loss, loss / initial loss) rows
    history: list[tuple[int, int, float, float]] = field(default_factory=list)

    @property
    def num_clusters(self) -> int:
        return self.state.num_clusters

    def report(self) -> str:
        doc = {
            "recording_id": self.recording_id,
            "num_segments": int(self.state.labels.size),
            "num_clusters": self.num_clusters,
            "iterations": [
                {
                    "iteration": s.iteration,
                    "num_clusters": s.num_clusters,
                    "epochs": s.epochs,
                    "merges": s.merges,
                    "loss_initial": s.loss_initial,
                    "loss_final": s.loss_final,
                }
                for s in self.iterations
            ],
            "labels": [int(z) for z in self.state.labels],
        }
        return json.dumps(doc, indent=2) + "\n"


def recording_rng(seed: int, recording_id: str) -> np.random.Generator:
    """Independent stream per recording, fixed by the seed and the id."""
    return np.random.default_rng(
        np.random.SeedSequence([seed, zlib.crc32(recording_id.encode())]))


def fit_pooled_whitening(recordings: Sequence[Recording]) -> WhiteningTransform:
    return compute_whitening(np.vstack([r.embeddings for r in recordings]))


def cluster_schedule(n0: int, n_target: int, p: int, num_iterations: int) -> int:
    """Geometric interpolation of the cluster count from ``n0`` to ``n_target``."""
    ratio = (n_target / n0) ** (p / num_iterations)
    return max(n_target, int(math.floor(n0 * ratio + 0.5)))


def _check(recording: Recording, hp: Hyperparams) -> None:
    if hp.pca_dim > recording.dim:
        raise ConfigurationError(
            f"pca_dim {hp.pca_dim} exceeds embedding dimension {recording.dim}")
    n_star = hp.target_speakers
    if n_star is not None and n_star > recording.num_segments:
        raise ConfigurationError(
            f"{n_star} speakers requested but recording has "
            f"{recording.num_segments} segments")


def _initialize(recording: Recording, whitening: WhiteningTransform, hp: Hyperparams):
    _check(recording, hp)
    u = whiten_normalize(recording, whitening)
    pca = compute_pca(u, hp.pca_dim)
    y = u @ pca.basis.T
    a = pairwise_affinity(y)
    floor = 1
    if hp.target_speakers is not None:
        floor = min(max(hp.target_speakers, 2), recording.num_segments)
    state, steps = ahc_cluster(a, threshold=hp.init_threshold, min_clusters=floor)
    return state, y, a, pca, steps


def initialize_clusters(recording: Recording, whitening: WhiteningTransform,
                        hp: Hyperparams) -> tuple[ClusterState, np.ndarray]:
    """Threshold AHC on the baseline projection.

    With a known speaker count merging never goes below ``max(N*, 2)``
    clusters.
    """
    state, y, _, _, _ = _initialize(recording, whitening, hp)
    return state, y


def labels_to_turns(recording: Recording, state: ClusterState) -> list[SpeakerTurn]:
    """Convert per-segment labels to speaker turns.

    Where consecutive segments overlap, both are cut at the midpoint of the
    overlap. Adjacent segments with the same label are merged.
    """
    seg = recording.segments
    n = seg.shape[0]
    if state.labels.size != n:
        raise ValueError("labels do not match the recording")
    start, end = seg[:, 0].copy(), seg[:, 1].copy()
    for i in range(n - 1):
        if seg[i, 1] > seg[i + 1, 0]:
            mid = 0.5 * (seg[i, 1] + seg[i + 1, 0])
            end[i] = mid
            start[i + 1] = mid
    turns: list[list] = []
    for i in range(n):
        lo, hi, z = start[i], end[i], int(state.labels[i])
        if turns and hi <= turns[-1][1]:
            continue
        lo = max(lo, turns[-1][1]) if turns else lo
        if turns and turns[-1][2] == z and lo - turns[-1][1] <= 1e-9:
            turns[-1][1] = hi
        else:
            turns.append([lo, hi, z])
    return [SpeakerTurn(recording.id, f"spk{z}", float(lo), float(hi - lo))
            for lo, hi, z in turns]


def run_ssa(recording: Recording, whitening: WhiteningTransform, hp: Hyperparams,
            rng: Optional[np.random.Generator] = None) -> DiarizationResult:
    """Self-supervised AHC on one recording."""
    if rng is None:
        rng = recording_rng(hp.seed, recording.id)
    x = recording.embeddings
    n_star = hp.target_speakers
    state, y, a, pca, steps = _initialize(recording, whitening, hp)
    n0 = state.num_clusters
    if n_star is not None and n0 < n_star:
        raise ConfigurationError(f"initialization left {n0} clusters, fewer than N*={n_star}")

    merges = list(steps)
    summaries = [IterationSummary(0, n0, 0, len(steps))]
    history: list[tuple[int, int, float, float]] = []
    theta: NetworkParams = init_network(whitening, pca)

    for p in range(1, hp.num_iterations + 1):
        if n_star is not None and state.num_clusters == n_star:
            break
        if state.num_clusters < 2:
            break
        theta, losses = train(theta, x, state, hp, rng)
        if losses:
            y = forward(theta, x)
            a = pairwise_affinity(y)
        history.extend((p, e + 1, l, r)
                       for e, (l, r) in enumerate(zip(losses, losses.ratios())))
        if n_star is not None:
            target = min(cluster_schedule(n0, n_star, p, hp.num_iterations),
                         state.num_clusters)
            state, steps = ahc_cluster(a, target=target, lam=hp.lam, k_c=hp.k_c,
                                       initial=state, iteration=p)
        else:
            state, steps = ahc_cluster(a, threshold=hp.stop_threshold, lam=hp.lam,
                                       k_c=hp.k_c, initial=state, iteration=p)
        merges.extend(steps)
        summaries.append(IterationSummary(
            p, state.num_clusters, len(losses), len(steps),
            losses.initial, losses.losses[-1] if losses else None))

    return DiarizationResult(recording.id, state, y, a, labels_to_turns(recording, state),
                             summaries, merges, history)


def cluster_matrix(a, hp: Hyperparams, lam: float = 0.0) -> tuple[ClusterState, list[MergeStep]]:
    """Plain AHC from singletons down to N*, or to ``hp.stop_threshold``."""
    if hp.target_speakers is not None:
        return ahc_cluster(a, target=hp.target_speakers, lam=lam, k_c=hp.k_c)
    return ahc_cluster(a, threshold=hp.stop_threshold, lam=lam, k_c=hp.k_c)


def run_baseline(recording: Recording, whitening: WhiteningTransform,
                 hp: Hyperparams) -> DiarizationResult:
    """Cosine AHC on whitened, length-normalized, PCA-projected embeddings."""
    _check(recording, hp)
    y = baseline_project(recording, whitening, hp.pca_dim)
    a = pairwise_affinity(y)
    state, steps = cluster_matrix(a, hp)
    return DiarizationResult(recording.id, state, y, a, labels_to_turns(recording, state),
                             [IterationSummary(0, state.num_clusters, 0, len(steps))], steps)
