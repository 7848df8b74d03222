import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ssahc.affinity import cluster_affinity, pairwise_affinity
from ssahc.ahc import ahc_cluster, nearest_neighbor_clusters, select_merge_pair
from ssahc.model import ClusterState

from oracles import best_pair, brute_ahc, merge_score


def random_affinity(rng, n):
    return pairwise_affinity(rng.standard_normal((n, int(rng.integers(2, 5)))))


def random_partition(rng, n):
    labels = rng.integers(0, max(2, n // 2), n)
    labels[:2] = [0, 1]
    clusters = [list(np.flatnonzero(labels == k)) for k in np.unique(labels)]
    return [list(map(int, c)) for c in clusters]


def test_nearest_neighbour_examples():
    a = np.array([[1, .2, .7, .1], [.2, 1, 0, 0], [.7, 0, 1, 0], [.1, 0, 0, 1]])
    assert nearest_neighbor_clusters([0], [[1], [2], [3]], a, 1) == [[2]]
    assert nearest_neighbor_clusters([0], [[1], [2], [3]], a, 5) == [[2], [1], [3]]
    with pytest.raises(ValueError):
        nearest_neighbor_clusters([0], [], a, 1)


@given(st.integers(0, 10_000), st.integers(1, 6))
def test_nearest_neighbours_match_sort_oracle(seed, k_c):
    rng = np.random.default_rng(seed)
    a = random_affinity(rng, 12)
    perm = rng.permutation(12)
    clusters = [sorted(map(int, perm[i:i + 2])) for i in range(0, 12, 2)]
    target, others = clusters[0], clusters[1:]
    got = nearest_neighbor_clusters(target, others, a, k_c)
    scores = [cluster_affinity(target, c, a) for c in others]
    expect = [others[i] for i in sorted(range(5), key=lambda i: -scores[i])][:k_c]
    assert got == expect


def test_select_three_singletons():
    a = np.array([[1, .1, .2], [.1, 1, .9], [.2, .9, 1]])
    assert select_merge_pair([[0], [1], [2]], a)[:2] == (1, 2)
    with pytest.raises(ValueError):
        select_merge_pair([[0, 1, 2]], a)


def test_penalty_changes_winner():
    # (0,1) wins on plain linkage but its union sits next to 2; (2,3) is isolated
    a = np.array([[1, .9, .8, -.8],
                  [.9, 1, .8, -.8],
                  [.8, .8, 1, .7],
                  [-.8, -.8, .7, 1]])
    singles = [[0], [1], [2], [3]]
    assert select_merge_pair(singles, a, lam=0.0)[:2] == (0, 1)
    i, j, score = select_merge_pair(singles, a, lam=0.5, k_c=1)
    assert (i, j) == (2, 3)
    oi, oj, oscore = best_pair(a.tolist(), singles, 0.5, 1)
    assert (oi, oj) == (2, 3)
    assert abs(score - oscore) < 1e-12
    assert abs(score - 0.7) < 1e-12


def test_penalty_vanishes_with_two_clusters():
    a = np.array([[1, .3, .1], [.3, 1, .2], [.1, .2, 1]])
    i, j, score = select_merge_pair([[0, 1], [2]], a, lam=5.0, k_c=3)
    assert (i, j) == (0, 1)
    assert abs(score - 0.15) < 1e-15


@given(st.integers(0, 100_000), st.integers(3, 12), st.sampled_from([0.1, 0.5, 2.0]),
       st.integers(1, 3))
def test_select_matches_brute_force(seed, n, lam, k_c):
    rng = np.random.default_rng(seed)
    a = random_affinity(rng, n)
    clusters = random_partition(rng, n)
    if len(clusters) < 2:
        return
    i, j, score = select_merge_pair(clusters, a, lam, k_c)
    oi, oj, oscore = best_pair(a.tolist(), clusters, lam, k_c)
    assert (i, j) == (oi, oj)
    assert abs(score - oscore) < 1e-12
    # lambda 0 is the plain linkage argmax
    assert select_merge_pair(clusters, a)[:2] == best_pair(a.tolist(), clusters)[:2]


@given(st.integers(0, 100_000), st.integers(2, 10))
def test_full_merge_sequence_matches_brute_force(seed, n):
    a = random_affinity(np.random.default_rng(seed), n)
    _, steps = ahc_cluster(a, target=1)
    merges, _ = brute_ahc(a.tolist(), target=1)
    assert [s.merged_pair for s in steps] == merges


@given(st.integers(0, 100_000), st.integers(3, 10), st.sampled_from([0.1, 1.0]))
def test_regularized_sequence_matches_brute_force(seed, n, lam):
    a = random_affinity(np.random.default_rng(seed), n)
    _, steps = ahc_cluster(a, target=1, lam=lam, k_c=2)
    merges, _ = brute_ahc(a.tolist(), target=1, lam=lam, k_c=2)
    assert [s.merged_pair for s in steps] == merges


def test_tie_break_is_lexicographic():
    a = np.full((5, 5), 0.5)
    np.fill_diagonal(a, 1.0)
    _, steps = ahc_cluster(a, target=1)
    assert [s.merged_pair for s in steps] == brute_ahc(a.tolist(), target=1)[0]
    assert steps[0].merged_pair == (0, 1)
    assert select_merge_pair([[3], [1], [2]], a)[:2] == (0, 1)


def test_all_ones_threshold_gives_one_cluster():
    state, steps = ahc_cluster(np.ones((6, 6)), threshold=0.5)
    assert state.num_clusters == 1
    assert [s.clusters_after for s in steps] == [5, 4, 3, 2, 1]


def test_two_groups_target_two():
    y = np.array([[1, 0]] * 4 + [[-1, 0.01]] * 3, dtype=float)
    state, _ = ahc_cluster(pairwise_affinity(y), target=2)
    np.testing.assert_array_equal(state.labels, [0, 0, 0, 0, 1, 1, 1])


def test_invalid_stops():
    a = np.eye(3)
    with pytest.raises(ValueError):
        ahc_cluster(a)
    with pytest.raises(ValueError):
        ahc_cluster(a, target=2, threshold=0.1)
    with pytest.raises(ValueError):
        ahc_cluster(a, target=4)
    with pytest.raises(ValueError):
        ahc_cluster(a, target=0)


def test_threshold_uses_plain_linkage_with_penalty():
    a = np.array([[1, .9, .8, -.8],
                  [.9, 1, .8, -.8],
                  [.8, .8, 1, .7],
                  [-.8, -.8, .7, 1]])
    # the first winner (2,3) has criterion 0.7 and linkage 0.7; threshold 0.75 stops at once
    state, steps = ahc_cluster(a, threshold=0.75, lam=0.5)
    assert steps == [] and state.num_clusters == 4
    state, steps = ahc_cluster(a, threshold=0.65, lam=0.5)
    assert steps[0].merged_pair == (2, 3) and steps[0].affinity == 0.7


def test_initial_state_is_carried_over():
    rng = np.random.default_rng(3)
    a = random_affinity(rng, 9)
    init = ClusterState(np.array([0, 1, 0, 2, 1, 3, 3, 2, 4]))
    state, steps = ahc_cluster(a, target=2, initial=init, iteration=4)
    assert state.num_clusters == 2
    assert all(s.iteration == 4 for s in steps)
    # every initial cluster stays whole
    for members in init.clusters():
        assert len(set(state.labels[members])) == 1


@given(st.integers(0, 100_000), st.integers(2, 12),
       st.floats(-1, 1), st.floats(-1, 1))
def test_threshold_monotone(seed, n, t1, t2):
    a = random_affinity(np.random.default_rng(seed), n)
    lo, hi = sorted((t1, t2))
    assert (ahc_cluster(a, threshold=hi)[0].num_clusters
            >= ahc_cluster(a, threshold=lo)[0].num_clusters)


@given(st.integers(0, 100_000), st.integers(2, 12), st.floats(-1, 1))
def test_threshold_matches_brute_force_and_labels_dense(seed, n, t):
    a = random_affinity(np.random.default_rng(seed), n)
    state, steps = ahc_cluster(a, threshold=t)
    merges, clusters = brute_ahc(a.tolist(), threshold=t)
    assert [s.merged_pair for s in steps] == merges
    assert state.clusters() == clusters
    assert sorted(set(state.labels.tolist())) == list(range(state.num_clusters))
    counts = [n] + [s.clusters_after for s in steps]
    assert all(x - y == 1 for x, y in zip(counts, counts[1:]))


def test_merge_trace_format():
    _, steps = ahc_cluster(np.array([[1, .5], [.5, 1]]), target=1, iteration=2)
    assert steps[0].format() == "2 0 1 0.5 0.5 1"
