from __future__ import annotations

import dataclasses
import itertools
import logging
import typing as t

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg

from py_meta_utils import Singleton

from .exceptions import ConfigError, DivergentSeries, MalformedLine, SingletonHyperlink
from .hypergraph import Hypergraph
from .metrics import auc, stratified_folds


logger = logging.getLogger(__name__)

KATZ_GRID_FACTORS = (0.5, 0.1, 0.05, 0.01, 0.005)
DENSE_EIGEN_LIMIT = 2000

Scorer = t.Callable[[t.FrozenSet[int]], float]


def _pairs(e: t.Iterable[int]) -> list[tuple[int, int]]:
    nodes = sorted(e)
    if len(nodes) < 2:
        raise SingletonHyperlink("Hyperlinks need at least two nodes", nodes)
    return list(itertools.combinations(nodes, 2))


def _pair_average(M: np.ndarray, nodes: list[int]) -> float:
    block = M[np.ix_(nodes, nodes)]
    upper = block[np.triu_indices(len(nodes), k=1)]
    return float(upper.mean())


def cn_score(g: Hypergraph, e: t.Iterable[int], walk_counts: bool = False) -> float:
    """
    Generalized Common Neighbours: the mean, over all node pairs of ``e``, of the
    number of common neighbours in the binarized adjacency matrix.

    :param walk_counts: Average ``(A^2)_{ij}`` (2-walk counts weighted by shared
                        hyperlinks) instead of common-neighbour counts.
    """
    _pairs(e)
    nodes = sorted(e)
    A = g.adjacency
    rows = A[nodes]
    if not walk_counts:
        rows = (rows > 0).astype(np.int64)
    rows = sp.csr_matrix(rows)
    return _pair_average((rows @ rows.T).toarray(), list(range(len(nodes))))


def spectral_radius(g: Hypergraph) -> float:
    """
    The largest eigenvalue of the (symmetric, nonnegative) adjacency matrix.
    """
    if g.n == 0 or g.adjacency.nnz == 0:
        return 0.0
    A = g.adjacency.astype(np.float64)
    if g.n <= DENSE_EIGEN_LIMIT:
        return float(scipy.linalg.eigvalsh(A.toarray())[-1])
    return float(scipy.sparse.linalg.eigsh(A, k=1, which="LA")[0][0])


def katz_matrix(g: Hypergraph, damping: float) -> np.ndarray:
    """
    ``(I - damping * A)^-1 - I``, the damped sum of walks of every length.
    """
    if damping <= 0:
        raise ConfigError("The Katz damping factor must be positive")
    rho = spectral_radius(g)
    if damping * rho >= 1.0 - 1e-12:
        raise DivergentSeries(
            f"Katz series diverges: damping={damping} >= 1/rho(A) = "
            f"{(1.0 / rho) if rho else float('inf')}"
        )
    identity = np.eye(g.n)
    inverse = scipy.linalg.solve(
        identity - damping * g.adjacency.toarray(), identity, assume_a="sym"
    )
    return inverse - identity


def default_katz_grid(g: Hypergraph) -> tuple[float, ...]:
    rho = spectral_radius(g)
    if rho == 0:
        return KATZ_GRID_FACTORS
    return tuple(f / rho for f in KATZ_GRID_FACTORS)


@dataclasses.dataclass(frozen=True)
class KatzConfig:
    """
    The Katz damping factor, or a grid to pick it from by cross-validation.
    """

    damping: float | None = None
    candidate_grid: tuple[float, ...] | None = None

    def grid(self, g: Hypergraph) -> tuple[float, ...]:
        return self.candidate_grid or default_katz_grid(g)


def katz_score(
    g: Hypergraph,
    e: t.Iterable[int],
    config: KatzConfig,
    matrix: np.ndarray | None = None,
) -> float:
    """
    The mean Katz index over all node pairs of ``e``.

    :param matrix: A precomputed :func:`katz_matrix` for ``config.damping``.
    """
    _pairs(e)
    if matrix is None:
        if config.damping is None:
            raise ConfigError("katz_score needs a damping factor; see select_katz_damping")
        matrix = katz_matrix(g, config.damping)
    return _pair_average(matrix, sorted(e))


def select_katz_damping(
    g: Hypergraph,
    candidates: t.Sequence[tuple[t.Iterable[int], int]],
    config: KatzConfig | None = None,
    folds: int = 5,
    seed: int = 0,
) -> float:
    """
    Picks the damping factor whose scores give the highest mean validation AUC
    over stratified folds of the labeled ``candidates``. Ties go to the smaller
    damping.
    """
    config = config or KatzConfig()
    if config.damping is not None:
        return config.damping

    grid = sorted(config.grid(g))
    hyperlinks = [frozenset(e) for e, _ in candidates]
    labels = np.array([label for _, label in candidates])
    splits = stratified_folds(labels, folds, seed)

    best, best_score = None, None
    for damping in grid:
        K = katz_matrix(g, damping)
        scores = np.array([_pair_average(K, sorted(e)) for e in hyperlinks])
        fold_aucs = [
            auc(
                scores[valid][labels[valid] > 0],
                scores[valid][labels[valid] < 0],
            )
            for _, valid in splits
        ]
        score = float(np.mean(fold_aucs))
        logger.debug("Katz damping=%.6g mean validation AUC=%.6f", damping, score)
        if best_score is None or score > best_score + 1e-12:
            best, best_score = damping, score

    assert best is not None
    logger.info("Selected Katz damping=%.6g", best)
    return best


def _prepare_cn(g, candidates, folds, seed) -> Scorer:
    return lambda e: cn_score(g, e)


def _prepare_katz(g, candidates, folds, seed) -> Scorer:
    damping = select_katz_damping(g, candidates, folds=folds, seed=seed)
    K = katz_matrix(g, damping)
    return lambda e: katz_score(g, e, KatzConfig(damping=damping), matrix=K)


class ScorerRegistry(metaclass=Singleton):
    """
    Named baseline scorers. Each entry prepares a scoring function from the
    training hypergraph and its labeled ``(hyperlink, label)`` rows, which are
    used for any cross-validated parameter.
    """

    def __init__(self) -> None:
        self._scorers: dict[str, t.Callable[..., Scorer]] = {}
        self.register("cn", _prepare_cn)
        self.register("katz", _prepare_katz)

    def register(self, name: str, prepare: t.Callable[..., Scorer]) -> None:
        self._scorers[name] = prepare

    @property
    def names(self) -> list[str]:
        return sorted(self._scorers)

    def prepare(
        self,
        name: str,
        g: Hypergraph,
        candidates: t.Sequence[tuple[t.Iterable[int], int]],
        folds: int = 5,
        seed: int = 0,
    ) -> Scorer:
        try:
            prepare = self._scorers[name]
        except KeyError:
            raise ConfigError(
                f"Unknown baseline {name!r} (choose from {', '.join(self.names)})"
            )
        return prepare(g, candidates, folds, seed)


def read_external_scores(path: str) -> dict[str, float]:
    """
    Reads an externally produced score file: one ``hyperlink-id<TAB>score`` line
    per candidate, ``#`` comments and blank lines skipped.
    """
    scores: dict[str, float] = {}
    with open(path, encoding="utf-8") as f:
        for lineno, raw in enumerate(f, start=1):
            line = raw.rstrip("\r\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            parts = line.split("\t")
            try:
                key, score = parts[0].strip(), float(parts[1])
            except (IndexError, ValueError):
                raise MalformedLine("Expected 'hyperlink-id<TAB>score'", line=lineno)
            if key in scores:
                raise MalformedLine(f"Repeated hyperlink id {key!r}", line=lineno)
            scores[key] = score
    return scores


__all__ = [
    "KatzConfig",
    "ScorerRegistry",
    "cn_score",
    "default_katz_grid",
    "katz_matrix",
    "katz_score",
    "read_external_scores",
    "select_katz_damping",
    "spectral_radius",
]
