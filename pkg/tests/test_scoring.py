import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ssahc.model import SpeakerTurn
from ssahc.scoring import aggregate, compute_der, optimal_speaker_mapping

from oracles import best_mapping_overlap


def T(spk, lo, hi, rec="r"):
    return SpeakerTurn(rec, spk, float(lo), float(hi - lo))


def close(r, missed, fa, conf, scored):
    got = (r.missed, r.false_alarm, r.confusion, r.scored)
    assert np.allclose(got, (missed, fa, conf, scored), atol=1e-9, rtol=0), got


def test_confusion_fixture():
    ref = [T("A", 0, 5), T("B", 5, 10)]
    hyp = [T("A", 0, 6), T("B", 6, 10)]
    r = compute_der(ref, hyp, collar=0.0)
    close(r, 0, 0, 1, 10)
    assert abs(r.der - 10.0) < 1e-9


def test_empty_hypothesis_all_missed():
    r = compute_der([T("A", 0, 10)], [], collar=0.0)
    close(r, 10, 0, 0, 10)
    assert r.der == 100.0


def test_identity_and_empty_reference():
    ref = [T("A", 0, 5), T("B", 5, 10)]
    assert compute_der(ref, ref).der == 0.0
    with pytest.raises(ValueError):
        compute_der([], ref)
    with pytest.raises(ValueError):
        compute_der(ref, ref, collar=-1)


def test_collar_excludes_boundaries():
    ref = [T("A", 0, 5), T("B", 5, 10)]
    # collar removes [0,.25], [4.75,5.25], [9.75,10]
    close(compute_der(ref, [T("x", 0, 10)], collar=0.25), 0, 0, 4.5, 9)
    r = compute_der(ref, [T("A", 0, 6), T("B", 6, 10)], collar=0.25)
    close(r, 0, 0, 0.75, 9)
    assert abs(r.der - 100 * 0.75 / 9) < 1e-9
    # a hypothesis error inside the collar is free
    close(compute_der(ref, [T("A", 0, 5.2), T("B", 5.2, 10)], collar=0.25), 0, 0, 0, 9)


def test_all_collared_is_error():
    with pytest.raises(ValueError):
        compute_der([T("A", 0, 0.4)], [T("A", 0, 0.4)], collar=0.25)


def test_overlap_handling():
    ref = [T("A", 0, 6), T("B", 4, 10)]
    hyp = [T("a", 0, 5), T("b", 5, 10)]
    close(compute_der(ref, hyp, collar=0.0), 0, 0, 0, 8)
    r = compute_der(ref, hyp, collar=0.0, ignore_overlap=False)
    close(r, 2, 0, 0, 12)


def test_false_alarm():
    r = compute_der([T("A", 0, 5)], [T("x", 0, 7)], collar=0.0)
    close(r, 0, 2, 0, 5)
    assert abs(r.der - 40.0) < 1e-9


def test_mapping_examples():
    ref = [T("A", 0, 5), T("B", 5, 10), T("C", 10, 12)]
    assert optimal_speaker_mapping(ref, ref) == {"A": "A", "B": "B", "C": "C"}
    renamed = [T({"A": "q", "B": "p", "C": "z"}[t.speaker], t.onset, t.end) for t in ref]
    assert optimal_speaker_mapping(ref, renamed) == {"A": "q", "B": "p", "C": "z"}


def test_aggregate_is_time_weighted():
    r1 = compute_der([T("A", 0, 10)], [], collar=0.0)
    r2 = compute_der([T("A", 0, 30)], [T("A", 0, 30)], collar=0.0)
    assert aggregate([r1, r2]).der == 25.0


@st.composite
def turn_sets(draw, max_speakers=5, overlap=False):
    n_spk = draw(st.integers(1, max_speakers))
    turns = []
    t = 0.0
    for _ in range(draw(st.integers(1, 12))):
        gap = draw(st.integers(0, 5)) / 10
        dur = draw(st.integers(1, 40)) / 10
        lo = t + gap
        if overlap and turns and draw(st.booleans()):
            lo = max(0.0, lo - draw(st.integers(0, 10)) / 10)
        spk = f"s{draw(st.integers(0, n_spk - 1))}"
        turns.append(T(spk, round(lo, 1), round(lo + dur, 1)))
        t = lo + dur
    return turns


@given(turn_sets(overlap=True))
def test_self_score_is_zero(ref):
    try:
        r = compute_der(ref, ref, collar=0.0)
    except ValueError:
        return  # fully overlapped reference has nothing to score
    assert r.errors == 0.0


@given(turn_sets(), st.permutations(range(5)))
def test_rename_invariance(hyp, perm):
    ref = [T("A", 0, 3), T("B", 3, 5.5), T("C", 5.5, 9), T("A", 9, 12)]
    names = {f"s{i}": f"x{perm[i]}" for i in range(5)}
    renamed = [T(names[t.speaker], t.onset, t.end) for t in hyp]
    a, b = compute_der(ref, hyp), compute_der(ref, renamed)
    assert abs(a.der - b.der) < 1e-9
    assert a.missed >= 0 and a.false_alarm >= 0 and a.confusion >= 0 and a.scored > 0


@given(turn_sets(max_speakers=5), turn_sets(max_speakers=5))
def test_mapping_matches_permutation_oracle(ref, hyp):
    mapping = optimal_speaker_mapping(ref, hyp)
    got = 0.0
    for r, h in mapping.items():
        for a in ref:
            for b in hyp:
                if a.speaker == r and b.speaker == h:
                    got += max(0.0, min(a.end, b.end) - max(a.onset, b.onset))
    expect = best_mapping_overlap([(t.speaker, t.onset, t.end) for t in ref],
                                  [(t.speaker, t.onset, t.end) for t in hyp])
    assert abs(got - expect) < 1e-9


@given(turn_sets(overlap=True), turn_sets(), st.floats(0, 1), st.floats(0, 1))
def test_collar_never_increases_scored(ref, hyp, c1, c2):
    lo, hi = sorted((c1, c2))
    try:
        small = compute_der(ref, hyp, collar=lo)
    except ValueError:
        return
    try:
        big = compute_der(ref, hyp, collar=hi)
    except ValueError:
        return
    assert big.scored <= small.scored + 1e-9
