"""Synthetic-corpus comparison of self-supervised AHC against the cosine-AHC baseline."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .model import Hyperparams, Recording, SpeakerTurn
from .pipeline import fit_pooled_whitening, run_baseline, run_ssa
from .preprocess import WhiteningTransform
from .scoring import compute_der
from .synth import SynthSpec, generate_recording


@dataclass(frozen=True)
class CorpusConfig:
    """Recordings with 2..5 speakers (cycling) drawn from one synthetic regime."""

    size: int = 20
    first_seed: int = 1000
    min_speakers: int = 2
    max_speakers: int = 5
    duration: float = 120.0
    dim: int = 128
    separation: float = 2.0
    within_noise: float = 1.0
    nuisance_rank: int = 4
    nuisance_scale: float = 1.75
    prefix: str = "rec"


@dataclass
class Corpus:
    recordings: list[Recording]
    references: list[list[SpeakerTurn]]
    whitening: WhiteningTransform

    def speaker_counts(self) -> list[int]:
        return [len({t.speaker for t in ref}) for ref in self.references]


def make_corpus(cfg: CorpusConfig) -> Corpus:
    span = cfg.max_speakers - cfg.min_speakers + 1
    recs, refs = [], []
    for i in range(cfg.size):
        spec = SynthSpec(num_speakers=cfg.min_speakers + i % span, duration=cfg.duration,
                         separation=cfg.separation, within_noise=cfg.within_noise,
                         dim=cfg.dim, seed=cfg.first_seed + i,
                         recording_id=f"{cfg.prefix}{i:03d}",
                         nuisance_rank=cfg.nuisance_rank, nuisance_scale=cfg.nuisance_scale)
        rec, turns = generate_recording(spec)
        recs.append(rec)
        refs.append(turns)
    return Corpus(recs, refs, fit_pooled_whitening(recs))


@dataclass
class Comparison:
    baseline: list[float] = field(default_factory=list)
    ssa: list[float] = field(default_factory=list)

    @property
    def baseline_mean(self) -> float:
        return float(np.mean(self.baseline))

    @property
    def ssa_mean(self) -> float:
        return float(np.mean(self.ssa))


def mean_ssa_der(corpus: Corpus, hp: Hyperparams) -> float:
    """Mean DER (%) of self-supervised AHC with the oracle speaker count."""
    ders = []
    for rec, ref, n in zip(corpus.recordings, corpus.references, corpus.speaker_counts()):
        res = run_ssa(rec, corpus.whitening, replace(hp, target_speakers=n))
        ders.append(compute_der(ref, res.turns).der)
    return float(np.mean(ders))


def select_init_threshold(dev: Corpus, hp: Hyperparams,
                          candidates: Sequence[float]) -> tuple[float, dict[float, float]]:
    """Candidate with the lowest mean dev DER (first on ties)."""
    scores = {th: mean_ssa_der(dev, replace(hp, init_threshold=th)) for th in candidates}
    best = min(candidates, key=lambda th: scores[th])
    return best, scores


def compare(corpus: Corpus, hp: Hyperparams) -> Comparison:
    out = Comparison()
    for rec, ref, n in zip(corpus.recordings, corpus.references, corpus.speaker_counts()):
        point = replace(hp, target_speakers=n)
        out.baseline.append(compute_der(ref, run_baseline(rec, corpus.whitening, point).turns).der)
        out.ssa.append(compute_der(ref, run_ssa(rec, corpus.whitening, point).turns).der)
    return out
