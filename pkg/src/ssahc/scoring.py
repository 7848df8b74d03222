"""Diarization error rate with a no-score collar and overlap exclusion."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .model import SpeakerTurn

TIME_EPS = 1e-9


@dataclass(frozen=True)
class DerReport:
    missed: float
    false_alarm: float
    confusion: float
    scored: float
    mapping: dict = field(default_factory=dict)

    @property
    def der(self) -> float:
        return 100.0 * (self.missed + self.false_alarm + self.confusion) / self.scored

    @property
    def errors(self) -> float:
        return self.missed + self.false_alarm + self.confusion


@dataclass(frozen=True)
class _Region:
    duration: float
    ref: frozenset
    hyp: frozenset


def _merge_points(points: Iterable[float]) -> list[float]:
    out: list[float] = []
    for p in sorted(points):
        if not out or p - out[-1] > TIME_EPS:
            out.append(p)
    return out


def _active(turns: Sequence[SpeakerTurn], lo: float, hi: float) -> frozenset:
    mid = 0.5 * (lo + hi)
    return frozenset(t.speaker for t in turns if t.onset <= mid < t.end)


def _regions(ref: Sequence[SpeakerTurn], hyp: Sequence[SpeakerTurn], collar: float,
             ignore_overlap: bool) -> list[_Region]:
    """Scored elementary regions of the shared timeline."""
    ref_bounds = [p for t in ref for p in (t.onset, t.end)]
    points = set(ref_bounds)
    points.update(p for t in hyp for p in (t.onset, t.end))
    if collar > 0:
        points.update(p for b in ref_bounds for p in (b - collar, b + collar))
    points = _merge_points(p for p in points if p >= 0)
    bounds = np.array(sorted(ref_bounds))
    out = []
    for lo, hi in zip(points, points[1:]):
        mid = 0.5 * (lo + hi)
        if collar > 0 and bounds.size:
            k = np.searchsorted(bounds, mid)
            near = [bounds[i] for i in (k - 1, k) if 0 <= i < bounds.size]
            if any(abs(mid - b) < collar for b in near):
                continue
        r = _active(ref, lo, hi)
        if ignore_overlap and len(r) > 1:
            continue
        h = _active(hyp, lo, hi)
        if r or h:
            out.append(_Region(hi - lo, r, h))
    return out


def _mapping(regions: Sequence[_Region]) -> dict[str, str]:
    refs = sorted({s for g in regions for s in g.ref})
    hyps = sorted({s for g in regions for s in g.hyp})
    if not refs or not hyps:
        return {}
    ri = {s: i for i, s in enumerate(refs)}
    hi = {s: i for i, s in enumerate(hyps)}
    overlap = np.zeros((len(refs), len(hyps)))
    for g in regions:
        for r in g.ref:
            for h in g.hyp:
                overlap[ri[r], hi[h]] += g.duration
    rows, cols = linear_sum_assignment(overlap, maximize=True)
    return {refs[r]: hyps[c] for r, c in zip(rows, cols) if overlap[r, c] > 0}


def optimal_speaker_mapping(ref: Sequence[SpeakerTurn],
                            hyp: Sequence[SpeakerTurn]) -> dict[str, str]:
    """One-to-one reference-to-hypothesis mapping maximizing co-occurring time."""
    if not ref:
        raise ValueError("reference is empty")
    return _mapping(_regions(ref, hyp, 0.0, False))


def compute_der(ref: Sequence[SpeakerTurn], hyp: Sequence[SpeakerTurn],
                collar: float = 0.25, ignore_overlap: bool = True) -> DerReport:
    """Score ``hyp`` against ``ref``.

    The collar is applied on both sides of every reference onset and
    offset. With ``ignore_overlap`` regions where the reference has two or
    more active speakers are not scored.
    """
    if not ref:
        raise ValueError("reference is empty")
    if collar < 0:
        raise ValueError("collar must be >= 0")
    regions = _regions(ref, hyp, collar, ignore_overlap)
    mapping = _mapping(regions)
    missed = fa = conf = scored = 0.0
    for g in regions:
        nr, nh = len(g.ref), len(g.hyp)
        correct = sum(1 for r in g.ref if mapping.get(r) in g.hyp)
        scored += nr * g.duration
        missed += max(nr - nh, 0) * g.duration
        fa += max(nh - nr, 0) * g.duration
        conf += (min(nr, nh) - correct) * g.duration
    if scored <= 0:
        raise ValueError("no scored reference speech (all collared or overlapped)")
    return DerReport(missed, fa, conf, scored, mapping)


def aggregate(reports: Iterable[DerReport]) -> DerReport:
    """Time-weighted corpus total."""
    reports = list(reports)
    return DerReport(
        sum(r.missed for r in reports),
        sum(r.false_alarm for r in reports),
        sum(r.confusion for r in reports),
        sum(r.scored for r in reports),
    )
