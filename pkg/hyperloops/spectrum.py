from __future__ import annotations

import dataclasses
import logging
import typing as t

import numpy as np
import scipy.sparse as sp

from joblib import Parallel, delayed

from .config import ABLATION_MODES, EPSILON
from .exceptions import (
    ConfigError,
    EnumerationTooLarge,
    NonSquareMatrix,
    SpectrumError,
)
from .hypergraph import Hypergraph, with_hyperlink, without_hyperlink


logger = logging.getLogger(__name__)

MAX_ORACLE_NODES = 10
MAX_ORACLE_HYPERLINKS = 10
MAX_ORACLE_TAU = 6

NODE_KINDS = {"node", "node-based"}
HYPERLINK_KINDS = {"hyperlink", "hyperlink-based"}


def trace_powers(M: t.Any, tau_max: int) -> np.ndarray:
    """
    Returns ``[tr(M^2), tr(M^3), ..., tr(M^tau_max)]`` in 64-bit floating point.

    For symmetric ``M`` only the powers up to ``ceil(tau_max / 2)`` are formed,
    using ``tr(M^(a+b)) = sum(M^a * M^b)``; otherwise powers are iterated.

    :param M: A square matrix, dense or scipy sparse.
    :param tau_max: The largest loop length, at least 2.
    """
    if tau_max < 2:
        raise ConfigError("tau_max must be at least 2")
    if len(M.shape) != 2 or M.shape[0] != M.shape[1]:
        raise NonSquareMatrix(f"Expected a square matrix, got shape {M.shape}")

    dense = M.toarray() if sp.issparse(M) else np.asarray(M)
    dense = dense.astype(np.float64)
    traces = np.empty(tau_max - 1)

    if np.array_equal(dense, dense.T):
        powers = [np.eye(len(dense)), dense]
        for _ in range(2, (tau_max + 1) // 2 + 1):
            powers.append(powers[-1] @ dense)
        for k in range(2, tau_max + 1):
            a = k // 2
            traces[k - 2] = np.vdot(powers[a], powers[k - a])
    else:
        power = dense
        for k in range(2, tau_max + 1):
            power = power @ dense
            traces[k - 2] = np.trace(power)

    if traces.size and traces.min() < -1e-9:
        raise SpectrumError(f"Negative loop count {traces.min()!r}")
    return np.maximum(traces, 0.0)


@dataclasses.dataclass(frozen=True, eq=False)
class LoopSpectrum:
    """
    Log loop counts ``log tr(A^tau)`` and ``log tr(P^tau)`` for ``tau = 2..tau_max``,
    each trace clamped to :data:`~hyperloops.config.EPSILON` first.
    """

    tau_max: int
    node_log_traces: np.ndarray
    link_log_traces: np.ndarray

    @property
    def vector(self) -> np.ndarray:
        return np.concatenate([self.node_log_traces, self.link_log_traces])


def spectrum(g: Hypergraph, tau_max: int) -> LoopSpectrum:
    node_traces = trace_powers(g.adjacency, tau_max)
    link_traces = trace_powers(g.intersection_profile, tau_max)
    return LoopSpectrum(
        tau_max=tau_max,
        node_log_traces=np.log(np.maximum(node_traces, EPSILON)),
        link_log_traces=np.log(np.maximum(link_traces, EPSILON)),
    )


@dataclasses.dataclass(frozen=True, eq=False)
class PerturbationFeatures:
    """
    How much forcing a hyperlink present rather than absent changes the loop
    spectrum: ``spectrum(G_{e+}) - spectrum(G_{e-})``, A-block first, then P-block,
    each by ascending loop length.
    """

    delta: np.ndarray
    cardinality: int
    label: int | None = None
    hyperlink: frozenset[int] | None = None

    @property
    def tau_max(self) -> int:
        return len(self.delta) // 2 + 1

    def truncate(self, tau_max: int) -> "PerturbationFeatures":
        """
        The same features at a smaller cutoff.
        """
        if tau_max > self.tau_max:
            raise ConfigError(
                f"Cannot extend features from tau_max={self.tau_max} to {tau_max}"
            )
        block = self.tau_max - 1
        k = tau_max - 1
        delta = np.concatenate([self.delta[:k], self.delta[block : block + k]])
        return dataclasses.replace(self, delta=delta)

    def with_mode(self, mode: str) -> "PerturbationFeatures":
        """
        Zeroes the P-block (``node-only``) or the A-block (``hyperlink-only``).
        """
        if mode not in ABLATION_MODES:
            raise ConfigError(f"Unknown ablation mode {mode!r}")
        if mode == "full":
            return self
        block = self.tau_max - 1
        delta = self.delta.copy()
        if mode == "node-only":
            delta[block:] = 0.0
        else:
            delta[:block] = 0.0
        return dataclasses.replace(self, delta=delta)

    def with_label(self, label: int) -> "PerturbationFeatures":
        return dataclasses.replace(self, label=label)


def perturbation_features(
    g: Hypergraph,
    e: t.Iterable[int],
    tau_max: int,
    base: LoopSpectrum | None = None,
    label: int | None = None,
) -> PerturbationFeatures:
    """
    Computes the perturbation feature vector of ``e`` against the observed
    hypergraph ``g``. ``e`` may or may not be one of ``g``'s hyperlinks; either
    way the pair ``G_{e+}``, ``G_{e-}`` is the same.

    :param base: The precomputed spectrum of ``g`` itself at ``tau_max``, reused
                 for whichever of ``G_{e+}``, ``G_{e-}`` equals ``g``.
    """
    e = g.check_hyperlink(e)
    plus = with_hyperlink(g, e)
    minus = without_hyperlink(g, e)

    def _spectrum(h: Hypergraph) -> LoopSpectrum:
        if base is not None and h is g and base.tau_max == tau_max:
            return base
        return spectrum(h, tau_max)

    delta = _spectrum(plus).vector - _spectrum(minus).vector
    return PerturbationFeatures(delta=delta, cardinality=len(e), label=label, hyperlink=e)


def extract_features(
    g: Hypergraph,
    hyperlinks: t.Sequence[t.Iterable[int]],
    tau_max: int,
    labels: t.Sequence[int] | None = None,
    jobs: int | None = 1,
) -> list[PerturbationFeatures]:
    """
    Perturbation features for many hyperlinks over one shared hypergraph, in input
    order regardless of ``jobs``.

    :param jobs: Worker count for :class:`joblib.Parallel`; ``-1`` or ``None``
                 uses every core.
    """
    hyperlinks = [frozenset(e) for e in hyperlinks]
    if labels is None:
        labels = [None] * len(hyperlinks)  # type: ignore[list-item]
    elif len(labels) != len(hyperlinks):
        raise ValueError("labels and hyperlinks differ in length")

    base = spectrum(g, tau_max)
    logger.debug(
        "Extracting features for %d hyperlinks (n=%d, m=%d, tau_max=%d)",
        len(hyperlinks),
        g.n,
        g.m,
        tau_max,
    )
    if jobs == 1 or len(hyperlinks) < 2:
        return [
            perturbation_features(g, e, tau_max, base=base, label=label)
            for e, label in zip(hyperlinks, labels)
        ]
    return Parallel(n_jobs=jobs or -1, prefer="threads")(
        delayed(perturbation_features)(g, e, tau_max, base=base, label=label)
        for e, label in zip(hyperlinks, labels)
    )


def count_loops_bruteforce(g: Hypergraph, tau: int, kind: str) -> int:
    """
    Counts closed walks of length ``tau`` by explicitly enumerating alternating
    node/hyperlink sequences. Test oracle for :func:`trace_powers`.

    Node-based walks never stay at the same node between consecutive steps;
    hyperlink-based walks never stay on the same hyperlink.

    :param kind: ``node`` or ``hyperlink``.
    """
    if g.n > MAX_ORACLE_NODES or g.m > MAX_ORACLE_HYPERLINKS or tau > MAX_ORACLE_TAU:
        raise EnumerationTooLarge(
            f"Enumeration is limited to n <= {MAX_ORACLE_NODES}, "
            f"m <= {MAX_ORACLE_HYPERLINKS}, tau <= {MAX_ORACLE_TAU} "
            f"(got n={g.n}, m={g.m}, tau={tau})"
        )
    if tau < 1:
        raise ConfigError("tau must be positive")

    links_of: list[list[int]] = [[] for _ in range(g.n)]
    for a, e in enumerate(g.hyperlinks):
        for i in e:
            links_of[i].append(a)

    # one entry per (hyperlink, node) step, so multiplicities are kept
    if kind in NODE_KINDS:
        steps = [
            [w for a in links_of[i] for w in g.hyperlinks[a] if w != i]
            for i in range(g.n)
        ]
    elif kind in HYPERLINK_KINDS:
        steps = [
            [b for v in e for b in links_of[v] if b != a]
            for a, e in enumerate(g.hyperlinks)
        ]
    else:
        raise ConfigError(f"Unknown walk kind {kind!r}")

    def walk(item: int, start: int, remaining: int) -> int:
        if remaining == 1:
            return steps[item].count(start)
        return sum(walk(nxt, start, remaining - 1) for nxt in steps[item])

    return sum(walk(start, start, tau) for start in range(len(steps)))


__all__ = [
    "LoopSpectrum",
    "PerturbationFeatures",
    "count_loops_bruteforce",
    "extract_features",
    "perturbation_features",
    "spectrum",
    "trace_powers",
]
