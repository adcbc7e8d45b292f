from __future__ import annotations

import dataclasses
import functools
import logging
import typing as t

from collections import Counter

import numpy as np
import scipy.sparse as sp

from .exceptions import DuplicateHyperlink, SingletonHyperlink, UnknownLabel


logger = logging.getLogger(__name__)

Hyperlink = t.FrozenSet[int]


class Hypergraph:
    """
    An immutable hypernetwork: an ordered node set plus an ordered list of distinct
    hyperlinks, each a set of at least two node indices.

    Nodes are stored sorted by label and addressed by their index ``0..n-1``.
    Hyperlinks keep their insertion order. The incidence matrix and the derived
    adjacency and intersection-profile matrices are computed lazily and cached;
    none of them may be modified.

    Instances should be created with :func:`build_hypergraph`, or derived from an
    existing one with :func:`with_hyperlink` and :func:`without_hyperlink`.
    """

    def __init__(self, nodes: t.Sequence[str], hyperlinks: t.Sequence[Hyperlink]):
        nodes = tuple(nodes)
        hyperlinks = tuple(frozenset(e) for e in hyperlinks)
        positions: dict[Hyperlink, int] = {}
        for a, e in enumerate(hyperlinks):
            if len(e) < 2:
                raise SingletonHyperlink("Hyperlinks need at least two nodes", e)
            if min(e) < 0 or max(e) >= len(nodes):
                raise UnknownLabel("Node index out of range", e)
            if e in positions:
                raise DuplicateHyperlink("Duplicate hyperlink", e)
            positions[e] = a

        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "hyperlinks", hyperlinks)
        object.__setattr__(self, "_positions", positions)
        object.__setattr__(self, "_labels", {label: i for i, label in enumerate(nodes)})

    nodes: tuple[str, ...]
    hyperlinks: tuple[Hyperlink, ...]
    _positions: dict[Hyperlink, int]
    _labels: dict[str, int]

    def __setattr__(self, key, value):
        raise AttributeError(f"{self.__class__.__name__} is immutable")

    @property
    def n(self) -> int:
        return len(self.nodes)

    @property
    def m(self) -> int:
        return len(self.hyperlinks)

    def __contains__(self, e: t.Iterable[int]) -> bool:
        return frozenset(e) in self._positions

    def position(self, e: t.Iterable[int]) -> int | None:
        """
        The column of ``e`` in the incidence matrix, or ``None`` when absent.
        """
        return self._positions.get(frozenset(e))

    def index_of(self, labels: t.Iterable[str]) -> Hyperlink:
        """
        Converts a collection of node labels to a hyperlink of node indices.
        """
        labels = list(labels)
        try:
            return frozenset(self._labels[label] for label in labels)
        except KeyError as e:
            raise UnknownLabel(f"Unknown node label {e.args[0]!r}", labels)

    def labels_of(self, e: t.Iterable[int]) -> tuple[str, ...]:
        return tuple(sorted(self.nodes[i] for i in e))

    def hyperlink_id(self, e: t.Iterable[int]) -> str:
        """
        The textual identity of a hyperlink: its labels sorted and joined by ``+``.
        """
        return "+".join(self.labels_of(e))

    def check_hyperlink(self, e: t.Iterable[int]) -> Hyperlink:
        e = frozenset(e)
        if len(e) < 2:
            raise SingletonHyperlink("Hyperlinks need at least two nodes", e)
        if min(e) < 0 or max(e) >= self.n:
            raise UnknownLabel("Node index out of range", e)
        return e

    @functools.cached_property
    def incidence(self) -> sp.csr_matrix:
        """
        The n x m binary incidence matrix ``S``.
        """
        rows = [i for e in self.hyperlinks for i in sorted(e)]
        cols = [a for a, e in enumerate(self.hyperlinks) for _ in e]
        data = np.ones(len(rows), dtype=np.int64)
        return sp.csr_matrix((data, (rows, cols)), shape=(self.n, self.m))

    @functools.cached_property
    def adjacency(self) -> sp.csr_matrix:
        """
        The node adjacency ``A = S S^T - D``.
        """
        S = self.incidence
        return _drop_diagonal(S @ S.T)

    @functools.cached_property
    def intersection_profile(self) -> sp.csr_matrix:
        """
        The intersection profile ``P = S^T S - Z``.
        """
        S = self.incidence
        return _drop_diagonal(S.T @ S)

    def degrees(self) -> np.ndarray:
        return np.asarray(self.incidence.sum(axis=1)).ravel()

    def cardinalities(self) -> np.ndarray:
        return np.array([len(e) for e in self.hyperlinks], dtype=np.int64)

    def __eq__(self, other):
        if not isinstance(other, Hypergraph):
            return NotImplemented
        return self.nodes == other.nodes and self.hyperlinks == other.hyperlinks

    def __hash__(self):
        return hash((self.nodes, self.hyperlinks))

    def __repr__(self):
        return f"{self.__class__.__name__}(n={self.n}, m={self.m})"

    def __reduce__(self):
        return self.__class__, (self.nodes, self.hyperlinks)


def _drop_diagonal(M: sp.spmatrix) -> sp.csr_matrix:
    M = sp.csr_matrix(M, dtype=np.int64)
    if M.shape[0] == 0:
        return M
    M = M - sp.diags(M.diagonal(), shape=M.shape, format="csr")
    M.eliminate_zeros()
    return M.astype(np.int64)


def build_hypergraph(
    hyperlinks: t.Iterable[t.Iterable[str]],
    node_labels: t.Iterable[str] | None = None,
    drop_duplicates: bool = False,
    drop_singletons: bool = False,
) -> Hypergraph:
    """
    Builds a canonical :class:`Hypergraph` from label sets.

    :param hyperlinks: The hyperlinks, each a collection of node labels. Their
                       order is kept.
    :param node_labels: The node set. If omitted, the union of the hyperlinks.
                        Labels are sorted lexicographically to assign indices.
    :param drop_duplicates: Skip repeated hyperlinks (with a logged warning)
                            instead of raising
                            :class:`~hyperloops.DuplicateHyperlink`.
    :param drop_singletons: Skip hyperlinks with fewer than two distinct labels
                            (with a logged warning) instead of raising
                            :class:`~hyperloops.SingletonHyperlink`.
    """
    label_sets = [frozenset(str(label) for label in e) for e in hyperlinks]
    if node_labels is None:
        labels = sorted(set().union(*label_sets)) if label_sets else []
    else:
        labels = sorted({str(label) for label in node_labels})

    index = {label: i for i, label in enumerate(labels)}
    seen: set[Hyperlink] = set()
    indexed: list[Hyperlink] = []
    for e in label_sets:
        if len(e) < 2:
            if drop_singletons:
                logger.warning("Dropping singleton hyperlink %s", "+".join(sorted(e)))
                continue
            raise SingletonHyperlink("Hyperlinks need at least two nodes", e)

        missing = sorted(e - index.keys())
        if missing:
            raise UnknownLabel(f"Unknown node label {missing[0]!r}", e)

        idx = frozenset(index[label] for label in e)
        if idx in seen:
            if drop_duplicates:
                logger.warning("Dropping duplicate hyperlink %s", "+".join(sorted(e)))
                continue
            raise DuplicateHyperlink("Duplicate hyperlink", e)
        seen.add(idx)
        indexed.append(idx)

    return Hypergraph(labels, indexed)


def with_hyperlink(g: Hypergraph, e: t.Iterable[int]) -> Hypergraph:
    """
    Returns ``G_{e+}``: ``g`` with ``e`` appended as its last hyperlink, or ``g``
    itself when ``e`` is already present.
    """
    e = g.check_hyperlink(e)
    if e in g:
        return g
    return Hypergraph(g.nodes, g.hyperlinks + (e,))


def without_hyperlink(g: Hypergraph, e: t.Iterable[int]) -> Hypergraph:
    """
    Returns ``G_{e-}``: ``g`` with ``e`` removed, or ``g`` itself when ``e`` is
    absent.
    """
    e = g.check_hyperlink(e)
    a = g.position(e)
    if a is None:
        return g
    return Hypergraph(g.nodes, g.hyperlinks[:a] + g.hyperlinks[a + 1 :])


def adjacency(g: Hypergraph) -> sp.csr_matrix:
    return g.adjacency


def intersection_profile(g: Hypergraph) -> sp.csr_matrix:
    return g.intersection_profile


@dataclasses.dataclass(frozen=True)
class HypergraphSummary:
    n: int
    m: int
    cardinality_histogram: dict[int, int]
    mean_cardinality: float
    max_cardinality: int
    mean_degree: float
    max_degree: int
    isolated_nodes: int

    def as_dict(self) -> dict[str, t.Any]:
        return dataclasses.asdict(self)


def describe(g: Hypergraph) -> HypergraphSummary:
    """
    Dataset statistics for a hypergraph: sizes, cardinality histogram and degrees.
    """
    cards = g.cardinalities()
    degrees = g.degrees()
    return HypergraphSummary(
        n=g.n,
        m=g.m,
        cardinality_histogram=dict(sorted(Counter(int(k) for k in cards).items())),
        mean_cardinality=float(cards.mean()) if g.m else 0.0,
        max_cardinality=int(cards.max()) if g.m else 0,
        mean_degree=float(degrees.mean()) if g.n else 0.0,
        max_degree=int(degrees.max()) if g.n else 0,
        isolated_nodes=int((degrees == 0).sum()),
    )


__all__ = [
    "Hyperlink",
    "Hypergraph",
    "HypergraphSummary",
    "adjacency",
    "build_hypergraph",
    "describe",
    "intersection_profile",
    "with_hyperlink",
    "without_hyperlink",
]
