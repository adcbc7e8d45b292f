from __future__ import annotations

import contextlib
import dataclasses
import json
import logging
import os
import typing as t

import numpy as np

from .config import NegativeSamplerConfig, SplitSpec
from .exceptions import (
    DuplicateHyperlink,
    MalformedLine,
    SamplerExhausted,
    SamplingError,
    SingletonHyperlink,
    TestCountTooLarge,
    UnknownLabel,
)
from .hypergraph import Hyperlink, Hypergraph, build_hypergraph


logger = logging.getLogger(__name__)

#: Node redraws for one sampled cardinality before the cardinality is redrawn.
NODE_RETRIES = 100

Source = t.Union[str, os.PathLike, t.IO[str], t.IO[bytes]]


@contextlib.contextmanager
def _open(source: Source) -> t.Iterator[t.Iterable[t.Union[str, bytes]]]:
    if isinstance(source, (str, os.PathLike)):
        with open(source, "rb") as f:
            yield f
    else:
        yield source


def read_hyperlinks(source: Source) -> list[tuple[int, tuple[str, ...]]]:
    """
    Reads a hyperlink file: one hyperlink per line, node labels separated by
    whitespace, ``#`` comment lines and blank lines ignored. UTF-8, LF or CRLF.

    Returns ``(line number, labels)`` pairs without checking cardinality or
    duplicates; see :func:`parse_hyperlink_file` for that.
    """
    rows = []
    with _open(source) as lines:
        for lineno, raw in enumerate(lines, start=1):
            if isinstance(raw, bytes):
                try:
                    line = raw.decode("utf-8")
                except UnicodeDecodeError:
                    raise MalformedLine("Line is not valid UTF-8", line=lineno)
            else:
                line = raw
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            labels = tuple(line.split())
            if len(set(labels)) != len(labels):
                raise MalformedLine("Repeated node label", labels, line=lineno)
            rows.append((lineno, labels))
    return rows


def _check_rows(
    rows: list[tuple[int, tuple[str, ...]]],
    drop_duplicates: bool,
    drop_singletons: bool,
) -> list[tuple[int, tuple[str, ...]]]:
    kept = []
    seen: dict[frozenset[str], int] = {}
    for lineno, labels in rows:
        if len(labels) < 2:
            if drop_singletons:
                logger.warning("Dropping singleton hyperlink at line %d", lineno)
                continue
            raise SingletonHyperlink(
                "Hyperlinks need at least two nodes", labels, line=lineno
            )
        key = frozenset(labels)
        if key in seen:
            if drop_duplicates:
                logger.warning(
                    "Dropping duplicate hyperlink at line %d (first seen at line %d)",
                    lineno,
                    seen[key],
                )
                continue
            raise DuplicateHyperlink(
                f"Duplicate of line {seen[key]}", labels, line=lineno
            )
        seen[key] = lineno
        kept.append((lineno, labels))
    return kept


def parse_hyperlink_file(
    source: Source,
    drop_duplicates: bool = False,
    drop_singletons: bool = False,
) -> Hypergraph:
    """
    Parses a hyperlink file into a :class:`~hyperloops.Hypergraph`. Nodes are the
    union of the labels, ordered lexicographically; hyperlinks keep file order.

    :param source: A path, or an open text or binary stream.
    :param drop_duplicates: Skip repeated hyperlinks instead of raising
                            :class:`~hyperloops.DuplicateHyperlink`.
    :param drop_singletons: Skip one-node lines instead of raising
                            :class:`~hyperloops.SingletonHyperlink`.
    """
    rows = _check_rows(read_hyperlinks(source), drop_duplicates, drop_singletons)
    return build_hypergraph([labels for _, labels in rows])


def parse_candidate_file(source: Source, g: Hypergraph) -> list[Hyperlink]:
    """
    Parses a candidate file against the node set of ``g``. Candidates may or may
    not be hyperlinks of ``g``; repeated candidates are an error.
    """
    candidates = []
    for lineno, labels in _check_rows(read_hyperlinks(source), False, False):
        try:
            candidates.append(g.index_of(labels))
        except UnknownLabel as e:
            e.line = lineno
            raise
    return candidates


def write_hyperlink_file(stream: t.TextIO, g: Hypergraph, hyperlinks=None) -> None:
    """
    Writes hyperlinks (default: all of ``g``'s) one per line, labels sorted.
    """
    for e in g.hyperlinks if hyperlinks is None else hyperlinks:
        stream.write(" ".join(g.labels_of(e)) + "\n")


@dataclasses.dataclass(frozen=True)
class Split:
    """
    A train/test split: ``train`` is the original hypergraph minus the deleted
    hyperlinks, with the same node indexing.
    """

    train: Hypergraph
    test_positives: tuple[Hyperlink, ...]
    deleted: tuple[int, ...]
    seed: int

    def write_manifest(
        self, stream: t.TextIO, config: t.Mapping[str, t.Any] | None = None
    ) -> None:
        write_split_manifest(stream, self, config)


def _apply_deletion(g: Hypergraph, deleted: t.Sequence[int], seed: int) -> Split:
    removed = set(deleted)
    train = Hypergraph(g.nodes, [e for a, e in enumerate(g.hyperlinks) if a not in removed])
    return Split(
        train=train,
        test_positives=tuple(g.hyperlinks[a] for a in sorted(removed)),
        deleted=tuple(sorted(removed)),
        seed=seed,
    )


def split_train_test(g: Hypergraph, spec: SplitSpec) -> Split:
    """
    Deletes ``spec.test_count`` hyperlinks uniformly at random, without
    replacement, as the held-out missing hyperlinks.
    """
    if spec.test_count >= g.m:
        raise TestCountTooLarge(
            f"test_count={spec.test_count} must be smaller than m={g.m}"
        )
    rng = np.random.default_rng(spec.seed)
    deleted = rng.choice(g.m, size=spec.test_count, replace=False)
    return _apply_deletion(g, [int(a) for a in deleted], spec.seed)


def write_split_manifest(
    stream: t.TextIO, split: Split, config: t.Mapping[str, t.Any] | None = None
) -> None:
    """
    Writes the deleted hyperlink indices with their seed. ``config`` is echoed as
    a JSON comment line; :func:`read_split_manifest` ignores it.
    """
    from . import __version__

    stream.write("# hyperloops split manifest\n")
    if config is not None:
        stream.write(f"# config: {json.dumps(config, sort_keys=True)}\n")
    stream.write(f"version = {__version__}\n")
    stream.write(f"seed = {split.seed}\n")
    stream.write(f"test_count = {len(split.deleted)}\n")
    stream.write(f"m = {split.train.m + len(split.deleted)}\n")
    stream.write("deleted = " + " ".join(str(a) for a in split.deleted) + "\n")


def read_split_manifest(stream: t.TextIO, g: Hypergraph) -> Split:
    """
    Reproduces a split from its manifest and the original hypergraph.
    """
    values = {}
    for line in stream:
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, _, value = line.partition("=")
        values[key.strip()] = value.strip()

    if int(values["m"]) != g.m:
        raise SamplingError(
            f"Manifest was written for m={values['m']} hyperlinks, graph has {g.m}"
        )
    deleted = [int(a) for a in values.get("deleted", "").split()]
    if len(deleted) != int(values["test_count"]):
        raise SamplingError("Manifest test_count does not match its deleted indices")
    return _apply_deletion(g, deleted, int(values["seed"]))


def _draw_nodes(rng: np.random.Generator, degrees: np.ndarray, k: int) -> Hyperlink | None:
    weights = degrees.astype(np.float64).copy()
    chosen = []
    for _ in range(k):
        cumulative = np.cumsum(weights)
        total = cumulative[-1] if len(cumulative) else 0.0
        if total <= 0:
            return None
        i = int(np.searchsorted(cumulative, rng.random() * total, side="right"))
        i = min(i, len(weights) - 1)
        chosen.append(i)
        weights[i] = 0.0
    return frozenset(chosen)


def sample_negative_hyperlinks(
    g: Hypergraph,
    config: NegativeSamplerConfig,
    exclude: t.Iterable[t.Iterable[int]] = (),
) -> list[Hyperlink]:
    """
    Generates fake hyperlinks: a cardinality drawn from the empirical cardinality
    distribution of ``g``, then that many distinct nodes drawn one at a time with
    probability proportional to their degree among the nodes not yet picked.

    Draws equal to a hyperlink of ``g``, to one of ``exclude``, or to an earlier
    sample are rejected. A rejected draw keeps its cardinality and redraws only
    the nodes, up to ``NODE_RETRIES`` times, so sampled cardinalities follow the
    empirical distribution. Every rejection counts toward the rejection budget.
    """
    if g.m == 0:
        raise SamplingError("Negative sampling needs at least one hyperlink")

    rng = np.random.default_rng(config.seed)
    values, counts = np.unique(g.cardinalities(), return_counts=True)
    cdf = np.cumsum(counts / counts.sum())
    degrees = g.degrees()
    forbidden = set(g.hyperlinks) | {frozenset(e) for e in exclude}

    samples: list[Hyperlink] = []
    seen: set[Hyperlink] = set()
    rejections = 0
    budget = config.rejection_budget
    while len(samples) < config.count:
        slot = int(np.searchsorted(cdf, rng.random(), side="right"))
        k = int(values[min(slot, len(values) - 1)])
        for _ in range(NODE_RETRIES):
            e = _draw_nodes(rng, degrees, k)
            if e is not None and len(e) >= 2 and e not in forbidden and e not in seen:
                seen.add(e)
                samples.append(e)
                break
            rejections += 1
            if rejections > budget:
                raise SamplerExhausted(
                    f"Gave up after {rejections} rejections with "
                    f"{len(samples)} of {config.count} samples"
                )
            if e is None:
                # too few nodes with positive degree for this k
                break

    logger.debug("Sampled %d fake hyperlinks (%d rejections)", len(samples), rejections)
    return samples


__all__ = [
    "Split",
    "parse_candidate_file",
    "parse_hyperlink_file",
    "read_hyperlinks",
    "read_split_manifest",
    "sample_negative_hyperlinks",
    "split_train_test",
    "write_hyperlink_file",
    "write_split_manifest",
]
