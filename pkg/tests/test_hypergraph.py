import itertools
import logging
import pickle

import numpy as np
import pytest

from hyperloops import (
    DuplicateHyperlink,
    Hypergraph,
    SingletonHyperlink,
    UnknownLabel,
    build_hypergraph,
    describe,
    with_hyperlink,
    without_hyperlink,
)

from .conftest import make_random_hypergraph


class TestBuildHypergraph:
    def test_nodes_are_sorted_by_label(self):
        g = build_hypergraph([("c", "a"), ("b", "c")])
        assert g.nodes == ("a", "b", "c")
        assert g.hyperlinks == (frozenset({0, 2}), frozenset({1, 2}))

    def test_explicit_node_labels_keep_isolated_nodes(self):
        g = build_hypergraph([("a", "b")], node_labels=["b", "z", "a"])
        assert g.nodes == ("a", "b", "z")
        assert g.n == 3
        assert g.degrees().tolist() == [1, 1, 0]

    def test_duplicate_hyperlinks_are_rejected(self):
        with pytest.raises(DuplicateHyperlink) as e:
            build_hypergraph([("a", "b"), ("b", "a")])
        assert "hyperlink: a+b" in str(e.value)

    def test_duplicates_can_be_dropped(self, caplog):
        with caplog.at_level(logging.WARNING, logger="hyperloops"):
            g = build_hypergraph([("a", "b"), ("b", "a"), ("b", "c")], drop_duplicates=True)
        assert g.m == 2
        assert "Dropping duplicate hyperlink a+b" in caplog.text

    def test_singletons_are_rejected(self):
        with pytest.raises(SingletonHyperlink):
            build_hypergraph([("a", "b"), ("c",)])

    def test_singletons_can_be_dropped(self):
        g = build_hypergraph([("a", "b"), ("c",)], drop_singletons=True)
        assert g.m == 1
        assert g.nodes == ("a", "b", "c")

    def test_unknown_labels_are_rejected(self):
        with pytest.raises(UnknownLabel) as e:
            build_hypergraph([("a", "q")], node_labels=["a", "b"])
        assert "'q'" in str(e.value)


class TestHypergraph:
    def test_it_is_immutable(self, triangle: Hypergraph):
        with pytest.raises(AttributeError):
            triangle.nodes = ("x",)

    def test_equality_and_hash(self):
        g1 = build_hypergraph([("a", "b"), ("b", "c")])
        g2 = build_hypergraph([("b", "a"), ("c", "b")])
        g3 = build_hypergraph([("b", "c"), ("a", "b")])
        assert g1 == g2
        assert hash(g1) == hash(g2)
        assert g1 != g3

    def test_repr(self, triangle: Hypergraph):
        assert repr(triangle) == "Hypergraph(n=3, m=3)"

    def test_pickle(self, triangle: Hypergraph):
        assert pickle.loads(pickle.dumps(triangle)) == triangle

    def test_index_of_and_labels_of(self, triangle: Hypergraph):
        e = triangle.index_of(["c", "a"])
        assert e == frozenset({0, 2})
        assert triangle.labels_of(e) == ("a", "c")
        assert triangle.hyperlink_id(e) == "a+c"
        assert e in triangle
        assert triangle.position(e) == 2

    def test_index_of_unknown_label(self, triangle: Hypergraph):
        with pytest.raises(UnknownLabel) as e:
            triangle.index_of(["a", "x"])
        assert "Unknown node label 'x'" in str(e.value)

    def test_incidence(self, triangle: Hypergraph):
        assert triangle.incidence.toarray().tolist() == [
            [1, 0, 1],
            [1, 1, 0],
            [0, 1, 1],
        ]

    def test_degrees_and_cardinalities(self, single: Hypergraph):
        assert single.degrees().tolist() == [1, 1, 1]
        assert single.cardinalities().tolist() == [3]


def test_triangle_and_single_hyperlink_share_adjacency(triangle, single):
    A_triangle = triangle.adjacency.toarray()
    A_single = single.adjacency.toarray()
    assert A_triangle.tolist() == [[0, 1, 1], [1, 0, 1], [1, 1, 0]]
    assert np.array_equal(A_triangle, A_single)

    assert triangle.intersection_profile.toarray().tolist() == [
        [0, 1, 1],
        [1, 0, 1],
        [1, 1, 0],
    ]
    assert single.intersection_profile.toarray().tolist() == [[0]]


def test_matrices_match_direct_counts():
    for seed in range(100):
        g = make_random_hypergraph(seed, n=6, m=6)
        A = g.adjacency.toarray()
        P = g.intersection_profile.toarray()
        for i in range(g.n):
            for j in range(g.n):
                shared = 0 if i == j else sum(1 for e in g.hyperlinks if {i, j} <= e)
                assert A[i, j] == shared
        for a, ea in enumerate(g.hyperlinks):
            for b, eb in enumerate(g.hyperlinks):
                assert P[a, b] == (0 if a == b else len(ea & eb))
        assert (A == A.T).all()
        assert (P == P.T).all()


def test_empty_hypergraph():
    g = build_hypergraph([], node_labels=["x", "y"])
    assert g.m == 0
    assert g.adjacency.shape == (2, 2)
    assert g.adjacency.nnz == 0
    assert g.intersection_profile.shape == (0, 0)


class TestPerturbation:
    def test_with_hyperlink_appends(self, triangle: Hypergraph):
        g = build_hypergraph([("a", "b"), ("b", "c")], node_labels="abc")
        e = g.index_of(["a", "c"])
        plus = with_hyperlink(g, e)
        assert plus.m == 3
        assert plus.hyperlinks[-1] == e
        assert plus == triangle

    def test_with_present_hyperlink_returns_the_same_graph(self, triangle):
        e = triangle.index_of(["a", "b"])
        assert with_hyperlink(triangle, e) is triangle

    def test_without_hyperlink(self, triangle: Hypergraph):
        e = triangle.index_of(["b", "c"])
        minus = without_hyperlink(triangle, e)
        assert minus.m == 2
        assert e not in minus
        assert minus.nodes == triangle.nodes
        assert e in triangle

    def test_without_absent_hyperlink_returns_the_same_graph(self, single):
        e = single.index_of(["a", "b"])
        assert without_hyperlink(single, e) is single

    def test_singleton_perturbation_is_rejected(self, triangle):
        with pytest.raises(SingletonHyperlink):
            with_hyperlink(triangle, [0])

    def test_adding_then_removing_restores_the_matrices(self):
        g = make_random_hypergraph(6, n=7, m=5)
        e = next(
            frozenset(c)
            for c in itertools.combinations(range(7), 3)
            if frozenset(c) not in g
        )
        restored = without_hyperlink(with_hyperlink(g, e), e)
        assert (restored.incidence != g.incidence).nnz == 0
        assert (restored.adjacency != g.adjacency).nnz == 0
        assert (restored.intersection_profile != g.intersection_profile).nnz == 0

    def test_removing_then_adding_restores_the_matrices(self):
        g = make_random_hypergraph(7, n=7, m=5)
        e = g.hyperlinks[1]
        restored = with_hyperlink(without_hyperlink(g, e), e)
        assert (restored.adjacency != g.adjacency).nnz == 0
        # e moves to the last column
        order = [restored.position(h) for h in g.hyperlinks]
        P = restored.intersection_profile.toarray()[np.ix_(order, order)]
        assert np.array_equal(P, g.intersection_profile.toarray())
        assert np.array_equal(restored.incidence.toarray()[:, order], g.incidence.toarray())


def test_describe(triangle: Hypergraph):
    summary = describe(triangle)
    assert summary.n == 3
    assert summary.m == 3
    assert summary.cardinality_histogram == {2: 3}
    assert summary.mean_cardinality == 2.0
    assert summary.max_degree == 2
    assert summary.mean_degree == 2.0
    assert summary.isolated_nodes == 0
