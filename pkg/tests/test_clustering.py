import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from v2v_encounters.clustering import ClusteringResult, evaluate_accuracy, kmedoids, recompute_objective
from v2v_encounters.errors import InvalidK, InvalidMatrix, MissingLabel


def euclid_matrix(points):
    p = np.asarray(points, dtype=float)
    return np.linalg.norm(p[:, None, :] - p[None, :, :], axis=-1)


def random_matrix(seed, n):
    return euclid_matrix(np.random.default_rng(seed).random((n, 2)))


def partition(result):
    groups = {}
    for e, c in result.assignment.items():
        groups.setdefault(c, set()).add(e)
    return {frozenset(g) for g in groups.values()}


def test_k_equals_n_gives_zero_objective():
    m = random_matrix(0, 7)
    res = kmedoids(m, 7)
    assert res.objective == 0.0
    assert sorted(res.assignment.values()) == list(range(7))


def test_k_one_picks_best_single_medoid():
    m = random_matrix(1, 15)
    res = kmedoids(m, 1, seed=3)
    # exhaustive scan over every candidate medoid
    assert res.objective == pytest.approx(m.sum(axis=1).min())


def test_three_separated_groups_recovered():
    rng = np.random.default_rng(2)
    centers = np.array([[0, 0], [100, 0], [0, 100]])
    pts = np.concatenate([c + rng.normal(0, 1, (10, 2)) for c in centers])
    res = kmedoids(euclid_matrix(pts), 3, seed=0)
    assert partition(res) == {frozenset(str(i) for i in range(g * 10, g * 10 + 10)) for g in range(3)}


@pytest.mark.parametrize("k", [0, 6])
def test_invalid_k(k):
    with pytest.raises(InvalidK):
        kmedoids(random_matrix(0, 5), k)


@pytest.mark.parametrize(
    "matrix",
    [
        np.zeros((2, 3)),
        np.array([[0.0, 1.0], [2.0, 0.0]]),
        np.array([[1.0, 1.0], [1.0, 0.0]]),
        np.array([[0.0, -1.0], [-1.0, 0.0]]),
        np.array([[0.0, np.nan], [np.nan, 0.0]]),
    ],
)
def test_invalid_matrix(matrix):
    with pytest.raises(InvalidMatrix):
        kmedoids(matrix, 1)


@given(seed=st.integers(0, 10_000), n=st.integers(1, 25), data=st.data())
def test_kmedoids_properties(seed, n, data):
    k = data.draw(st.integers(1, n))
    m = random_matrix(seed, n)
    res = kmedoids(m, k, seed=seed)
    ids = [str(i) for i in range(n)]

    hist = res.objective_history
    assert all(b <= a + 1e-9 for a, b in zip(hist, hist[1:]))
    assert res.objective == pytest.approx(recompute_objective(res, m, ids))
    assert len(set(res.medoids)) == k
    for c, med in enumerate(res.medoids):
        assert res.assignment[med] == c

    medoid_idx = [int(x) for x in res.medoids]
    for e, c in res.assignment.items():
        i = int(e)
        if e in res.medoids:
            continue
        assert m[i, medoid_idx[c]] <= m[i, medoid_idx].min() + 1e-12

    again = kmedoids(m, k, seed=seed)
    assert again.assignment == res.assignment and again.medoids == res.medoids


def test_partition_equal_under_permutation_with_clear_groups():
    rng = np.random.default_rng(9)
    pts = np.concatenate([c + rng.normal(0, 0.5, (6, 2)) for c in ([0, 0], [50, 0], [0, 50])])
    m = euclid_matrix(pts)
    ids = [f"e{i}" for i in range(18)]
    perm = rng.permutation(18)
    a = kmedoids(m, 3, seed=4, ids=ids)
    b = kmedoids(m[np.ix_(perm, perm)], 3, seed=4, ids=[ids[i] for i in perm])
    assert partition(a) == partition(b)


def test_tie_goes_to_lower_cluster():
    # point 2 sits exactly halfway between points 0 and 1
    m = euclid_matrix([[0, 0], [2, 0], [1, 0]])
    seen = 0
    for seed in range(20):
        res = kmedoids(m, 2, seed=seed)
        if "2" not in res.medoids:
            seen += 1
            assert res.assignment["2"] == 0
    assert seen > 0


def _result(assignment, k):
    return ClusteringResult(k, assignment, [], 0.0, 0, 0)


def test_accuracy_all_correct():
    res = _result({"a": 0, "b": 0, "c": 1}, 2)
    rep = evaluate_accuracy(res, {"a": "cf", "b": "cf", "c": "int"})
    assert [c.accuracy for c in rep.per_cluster] == [1.0, 1.0]


def test_accuracy_three_of_four():
    res = _result({"a": 0, "b": 0, "c": 0, "d": 0}, 1)
    (c,) = evaluate_accuracy(res, {"a": "x", "b": "x", "c": "x", "d": "y"}).per_cluster
    assert (c.majority_label, c.true_count, c.false_count, c.accuracy) == ("x", 3, 1, 0.75)


def test_accuracy_majority_tie_alphabetical():
    res = _result({"a": 0, "b": 0}, 1)
    (c,) = evaluate_accuracy(res, {"a": "zeta", "b": "alpha"}).per_cluster
    assert c.majority_label == "alpha" and c.accuracy == 0.5


def test_accuracy_missing_label():
    with pytest.raises(MissingLabel):
        evaluate_accuracy(_result({"a": 0, "b": 0}, 1), {"a": "x"})


def test_accuracy_counts_cover_every_encounter():
    res = kmedoids(random_matrix(5, 12), 3, seed=1)
    labels = {e: "xy"[int(e) % 2] for e in res.assignment}
    rep = evaluate_accuracy(res, labels)
    assert sum(c.true_count + c.false_count for c in rep.per_cluster) == 12
    assert all(0.5 <= c.accuracy <= 1.0 for c in rep.per_cluster if c.true_count)
