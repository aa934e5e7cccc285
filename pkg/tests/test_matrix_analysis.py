import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cpsim.errors import DataError, EmptyCollection, EmptyMemberSet, ParseError, TooFewSeries
from cpsim.matrix_analysis import (
    BLUE,
    RED,
    YELLOW,
    Dendrogram,
    DistanceMatrix,
    classify_ratio,
    distance_matrix,
    hierarchical_cluster,
    matrix_norm,
    triangle_test,
)
from cpsim.uncertain_sets import SetWithUncertainty, from_points

from oracles import charpoly, charpoly_roots, jacobi_eigenvalues


def witness_matrix():
    return distance_matrix([from_points([0]), from_points([0, 1]), from_points([1])], 1, labels=["S", "T", "R"])


class TestDistanceMatrix:
    def test_identical_sets(self):
        S = from_points([3, 9])
        D = distance_matrix([S, S, S], 50)
        assert np.all(D.values == 0)

    def test_normalized_entry(self):
        D = distance_matrix([from_points([0]), from_points([0, 10])], 100)
        assert D.values[0, 1] == D.values[1, 0] == 0.025

    def test_doubling_length_halves(self):
        sets = [from_points([0]), from_points([0, 10]), from_points([4, 7])]
        a, b = distance_matrix(sets, 100), distance_matrix(sets, 200)
        assert np.allclose(b.values * 2, a.values, rtol=0, atol=1e-15)

    def test_errors(self):
        with pytest.raises(EmptyCollection):
            distance_matrix([from_points([0])], 10)
        with pytest.raises(EmptyMemberSet, match="'b'"):
            distance_matrix([from_points([0]), SetWithUncertainty.empty()], 10, labels=["a", "b"])

    @pytest.mark.parametrize(
        "values",
        [
            [[0, 1], [2, 0]],
            [[1, 0], [0, 0]],
            [[0, -1], [-1, 0]],
            [[0, np.nan], [np.nan, 0]],
            [[0, 1, 2], [1, 0, 3]],
        ],
    )
    def test_invariants_enforced(self, values):
        with pytest.raises(DataError):
            DistanceMatrix(tuple("abc"[: len(values)]), values)

    @settings(max_examples=30, deadline=None)
    @given(st.lists(st.sets(st.integers(0, 300), min_size=1, max_size=6), min_size=2, max_size=6))
    def test_output_invariants(self, point_sets):
        D = distance_matrix([from_points(s) for s in point_sets], 300, p=1.5, q=2)
        v = D.values
        assert np.array_equal(v, v.T) and np.all(np.diag(v) == 0) and np.all(v >= 0)

    def test_csv_round_trip(self):
        rng = np.random.default_rng(0)
        sets = [from_points(rng.choice(500, size=3, replace=False)) for _ in range(5)]
        D = distance_matrix(sets, 500, labels=["a", "b,c", "d", "e", "f"])
        assert DistanceMatrix.from_csv(D.to_csv()) == D

    def test_csv_parse_error_location(self):
        text = ",a,b\na,0.0,x\nb,1.0,0.0\n"
        with pytest.raises(ParseError) as info:
            DistanceMatrix.from_csv(text)
        assert info.value.row == 2 and info.value.column == "b"


class TestNorms:
    def test_two_by_two(self):
        D = DistanceMatrix(("a", "b"), [[0, 3], [3, 0]])
        assert matrix_norm(D, "l1") == 3
        assert matrix_norm(D, "l2") == 3
        assert matrix_norm(D, "operator") == pytest.approx(3, abs=1e-14)

    @pytest.mark.parametrize("kind", ["l1", "l2", "operator"])
    def test_zero(self, kind):
        assert matrix_norm(np.zeros((4, 4)), kind) == 0

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            matrix_norm(np.zeros((2, 2)), "frobenius")

    def test_too_small(self):
        with pytest.raises(TooFewSeries):
            matrix_norm(np.zeros((1, 1)), "l1")

    @pytest.mark.parametrize("seed", range(10))
    def test_operator_against_eigen_oracles(self, seed):
        rng = np.random.default_rng(seed)
        A = rng.standard_normal((6, 6))
        A = A + A.T
        want = max(abs(v) for v in jacobi_eigenvalues(A))
        assert abs(matrix_norm(A, "operator") - want) <= 1e-8
        want_cp = max(abs(v) for v in charpoly_roots(A))
        assert abs(matrix_norm(A, "operator") - want_cp) <= 1e-8

    def test_charpoly_oracle_sanity(self):
        A = np.array([[2.0, 1.0], [1.0, 2.0]])
        assert np.allclose(charpoly(A), [1, -4, 3])
        assert np.allclose(charpoly_roots(A), [1, 3])


class TestTriangle:
    def test_witness_distances(self):
        D = witness_matrix().values
        assert (D[0, 1], D[1, 2], D[0, 2]) == (0.25, 0.25, 1.0)

    def test_witness_classification(self):
        t = triangle_test(witness_matrix())
        assert t.ratios[0, 1, 2] == 2.0 and t.classifications[0, 1, 2] == YELLOW
        assert t.ratios[2, 1, 0] == 2.0 and t.classifications[2, 1, 0] == YELLOW
        # by hand: every other ordered triple satisfies the inequality
        assert t.n_triples == 6 and t.counts == {"blue": 4, "yellow": 2, "red": 0}
        assert t.fail_fraction == pytest.approx(2 / 6, abs=1e-15)
        assert t.mean_fail_ratio == 2.0

    def test_boundaries(self):
        assert classify_ratio(1.0) == BLUE
        assert classify_ratio(1.0 + 1e-9) == YELLOW
        assert classify_ratio(2.0) == YELLOW
        assert classify_ratio(2.0 + 1e-9) == RED

    def test_red(self):
        D = np.array([[0, 0.1, 1.0], [0.1, 0, 0.1], [1.0, 0.1, 0]])
        t = triangle_test(D)
        assert t.classifications[0, 1, 2] == RED and t.ratios[0, 1, 2] == pytest.approx(5.0)

    def test_degenerate_excluded(self):
        D = np.array([[0, 0, 1.0], [0, 0, 1.0], [1.0, 1.0, 0]])
        t = triangle_test(D)
        assert t.n_degenerate + t.n_triples == 6
        assert np.all(t.classifications[np.isnan(t.ratios)] == -1)
        for i, j, k in zip(*np.nonzero(t.classifications >= 0)):
            assert D[i, j] + D[j, k] > 0

    def test_degenerate_count(self):
        # all points coincide except one: D_ij + D_jk == 0 only for i, j, k inside the cluster
        D = np.zeros((4, 4))
        D[3, :3] = D[:3, 3] = 1.0
        t = triangle_test(D)
        assert t.n_degenerate == 6  # ordered triples of {0, 1, 2}
        assert t.n_triples == 24 - 6

    @settings(max_examples=50)
    @given(st.integers(3, 8), st.integers(1, 3), st.integers(0, 10_000))
    def test_true_metric_never_fails(self, n, dim, seed):
        X = np.random.default_rng(seed).standard_normal((n, dim))
        D = np.sqrt(((X[:, None] - X[None]) ** 2).sum(-1))
        D = (D + D.T) / 2
        np.fill_diagonal(D, 0)
        t = triangle_test(D)
        assert t.fail_fraction == 0 and t.counts["yellow"] == t.counts["red"] == 0
        assert t.mean_fail_ratio is None

    def test_too_few(self):
        with pytest.raises(TooFewSeries):
            triangle_test(np.zeros((2, 2)))

    def test_json_and_dump(self):
        t = triangle_test(witness_matrix())
        d = json.loads(t.to_json())
        assert set(d) >= {"fail_fraction", "mean_fail_ratio", "counts"}
        rows = t.triples_csv().strip().splitlines()
        assert rows[0] == "i,j,k,ratio,class" and len(rows) == 7


class TestClustering:
    def test_line_average(self):
        x = np.array([0.0, 1.0, 10.0])
        dend = hierarchical_cluster(np.abs(x[:, None] - x[None]), "average")
        assert dend.merges[0, :3].tolist() == [0, 1, 1.0]
        assert dend.merges[1, 2] == 9.5

    def test_identical_rows_first(self):
        D = np.array([[0, 0, 4], [0, 0, 4], [4, 4, 0.0]])
        dend = hierarchical_cluster(D)
        assert dend.merges[0, 2] == 0 and set(dend.merges[0, :2]) == {0, 1}

    @settings(max_examples=30)
    @given(st.integers(2, 9), st.integers(0, 10_000))
    def test_shape_and_monotone(self, n, seed):
        X = np.random.default_rng(seed).standard_normal((n, 2))
        D = np.sqrt(((X[:, None] - X[None]) ** 2).sum(-1))
        for method in ("average", "single", "complete"):
            dend = hierarchical_cluster(D, method)
            assert dend.merges.shape == (n - 1, 4)
            assert dend.merges[-1, 3] == n
            assert np.all(np.diff(dend.heights) >= -1e-12)

    def test_single_below_complete(self):
        D = np.array([[0, 2, 6, 10], [2, 0, 5, 9], [6, 5, 0, 4], [10, 9, 4, 0.0]])
        s = hierarchical_cluster(D, "single").heights
        c = hierarchical_cluster(D, "complete").heights
        assert np.all(s <= c)

    def test_csv_round_trip(self):
        D = witness_matrix()
        dend = hierarchical_cluster(D)
        text = dend.to_csv()
        assert text.splitlines()[0].startswith("step,left,right,height")
        back = Dendrogram.from_csv(text, D.labels)
        assert np.array_equal(back.merges, dend.merges)

    def test_bad_linkage(self):
        with pytest.raises(ValueError):
            hierarchical_cluster(np.zeros((3, 3)), "ward")
