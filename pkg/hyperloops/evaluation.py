from __future__ import annotations

import csv
import dataclasses
import io
import json
import logging
import time
import typing as t

import numpy as np

from .baselines import ScorerRegistry
from .config import ExperimentProtocol, NegativeSamplerConfig, SplitSpec
from .data import Split, sample_negative_hyperlinks, split_train_test
from .exceptions import ConfigError
from .hypergraph import Hyperlink, Hypergraph
from .metrics import auc, precision_at
from .model import fit_hypergraph, score_candidates
from .spectrum import extract_features


logger = logging.getLogger(__name__)

SUMMARY_HEADER = ("method", "dataset", "auc_mean", "auc_std", "prec_mean", "prec_std")


@dataclasses.dataclass(frozen=True)
class RunResult:
    """
    The metrics of one repetition, plus what was selected while fitting.
    """

    repetition: int
    seed: int
    auc: float
    precision: float
    gamma: float | None = None
    tau_max: int | None = None
    positives: int = 0
    negatives: int = 0
    runtime: float = 0.0

    def as_dict(self, include_timings: bool = False) -> dict[str, t.Any]:
        rv = dataclasses.asdict(self)
        if not include_timings:
            del rv["runtime"]
        return rv


def _aggregate(values: t.Sequence[float]) -> tuple[float, float]:
    arr = np.asarray(values, dtype=np.float64)
    mean = float(arr.mean())
    std = float(arr.std(ddof=1)) if len(arr) > 1 else 0.0
    return mean, std


@dataclasses.dataclass(frozen=True)
class ExperimentReport:
    """
    Per-run rows and their aggregates (mean and sample standard deviation) for
    one experiment, with the configuration that produced them.
    """

    runs: tuple[RunResult, ...]
    config: dict[str, t.Any]
    method: str = "loops"
    dataset: str = ""
    mode: str = "full"
    splits: tuple[Split, ...] = dataclasses.field(default=(), compare=False, repr=False)

    @classmethod
    def from_runs(
        cls,
        runs: t.Sequence[RunResult],
        config: t.Mapping[str, t.Any],
        method: str = "loops",
        dataset: str = "",
        mode: str = "full",
        splits: t.Sequence[Split] = (),
    ) -> "ExperimentReport":
        if not runs:
            raise ConfigError("An experiment report needs at least one run")
        return cls(tuple(runs), dict(config), method, dataset, mode, tuple(splits))

    @property
    def repetitions(self) -> int:
        return len(self.runs)

    @property
    def aggregate(self) -> dict[str, float]:
        auc_mean, auc_std = _aggregate([r.auc for r in self.runs])
        prec_mean, prec_std = _aggregate([r.precision for r in self.runs])
        return {
            "auc_mean": auc_mean,
            "auc_std": auc_std,
            "prec_mean": prec_mean,
            "prec_std": prec_std,
        }

    def to_dict(self, include_timings: bool = False) -> dict[str, t.Any]:
        from . import __version__

        return {
            "version": __version__,
            "method": self.method,
            "dataset": self.dataset,
            "mode": self.mode,
            "repetitions": self.repetitions,
            "config": self.config,
            "runs": [r.as_dict(include_timings) for r in self.runs],
            "aggregate": self.aggregate,
        }

    def to_json(self, include_timings: bool = False) -> str:
        return json.dumps(self.to_dict(include_timings), indent=2, sort_keys=True) + "\n"

    def write(self, path: str, include_timings: bool = False) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write(self.to_json(include_timings))

    def summary_row(self) -> str:
        """
        One comma-separated ``method,dataset,auc_mean,auc_std,prec_mean,prec_std``
        row for side-by-side method tables.
        """
        agg = self.aggregate
        out = io.StringIO()
        csv.writer(out, lineterminator="\n").writerow(
            [
                self.method,
                self.dataset,
                *(format(agg[key], ".6f") for key in SUMMARY_HEADER[2:]),
            ]
        )
        return out.getvalue()


def _run_loops(
    split: Split,
    negatives: list[Hyperlink],
    protocol: ExperimentProtocol,
    seed: int,
) -> tuple[np.ndarray, dict[str, t.Any]]:
    train = split.train
    model, fakes = fit_hypergraph(
        train, negatives, protocol.model, mode=protocol.mode, seed=seed, jobs=protocol.jobs
    )
    held_out = extract_features(
        train, split.test_positives, model.tau_max, jobs=protocol.jobs
    )
    scores = score_candidates(model, held_out + fakes)
    return scores, {"gamma": model.gamma, "tau_max": model.tau_max}


def _run_baseline(
    split: Split,
    negatives: list[Hyperlink],
    protocol: ExperimentProtocol,
    seed: int,
) -> tuple[np.ndarray, dict[str, t.Any]]:
    train = split.train
    labeled = [(e, 1) for e in train.hyperlinks] + [(e, -1) for e in negatives]
    scorer = ScorerRegistry().prepare(
        protocol.method, train, labeled, folds=protocol.model.folds, seed=seed
    )
    candidates = list(split.test_positives) + list(negatives)
    return np.array([scorer(e) for e in candidates]), {}


def run_experiment(
    g: Hypergraph,
    protocol: ExperimentProtocol,
    repetitions: int = 12,
    base_seed: int = 0,
    candidates: t.Sequence[Hyperlink] | None = None,
    dataset: str = "",
    run_config: t.Mapping[str, t.Any] | None = None,
) -> ExperimentReport:
    """
    Repeats the hold-out protocol ``repetitions`` times with seeds
    ``base_seed + r``: delete test hyperlinks, build the fake-hyperlink pool,
    fit on observed (positive) versus fake (negative) hyperlinks, then rank held-out
    positives against the same fake pool.

    :param candidates: A provided fake-hyperlink pool (used when
                       ``protocol.split.candidate_source == "provided-file"``);
                       members that are hyperlinks of ``g`` are dropped.
    :param run_config: The invocation settings (see :meth:`~hyperloops.RunConfig.echo`),
                       recorded under ``"run"`` in the report config.
    """
    if repetitions < 1:
        raise ConfigError("repetitions must be at least 1")
    provided = protocol.split.candidate_source == "provided-file"
    if provided and candidates is None:
        raise ConfigError("A provided-file protocol needs a candidate pool")

    run = _run_loops if protocol.method == "loops" else _run_baseline
    runs, splits = [], []
    for r in range(repetitions):
        seed = base_seed + r
        started = time.perf_counter()

        split = split_train_test(
            g, SplitSpec(protocol.split.test_count, seed, protocol.split.candidate_source)
        )
        if provided:
            negatives = [frozenset(e) for e in candidates if e not in g]  # type: ignore[union-attr]
        else:
            sampler = protocol.sampler
            negatives = sample_negative_hyperlinks(
                split.train,
                NegativeSamplerConfig(sampler.count, seed, sampler.max_rejections),
                exclude=g.hyperlinks,
            )

        scores, selected = run(split, negatives, protocol, seed)
        q = len(split.test_positives)
        pos_scores, neg_scores = scores[:q], scores[q:]
        ranked = list(zip(range(len(scores)), scores.tolist()))
        result = RunResult(
            repetition=r,
            seed=seed,
            auc=auc(pos_scores, neg_scores),
            precision=precision_at(set(range(q)), ranked, q),
            positives=q,
            negatives=len(negatives),
            runtime=time.perf_counter() - started,
            **selected,
        )
        logger.info(
            "Run %d (seed %d): AUC=%.4f Precision=%.4f", r, seed, result.auc, result.precision
        )
        runs.append(result)
        splits.append(split)

    echoed = protocol.as_dict()
    del echoed["jobs"]
    config = {
        "protocol": echoed,
        "base_seed": base_seed,
        "repetitions": repetitions,
        "negatives": (
            "provided pool" if provided else "regenerated per repetition from the seed"
        ),
        "training_negatives": "the same pool that is ranked against held-out positives",
    }
    if run_config is not None:
        config["run"] = dict(run_config)
    return ExperimentReport.from_runs(
        runs, config, protocol.method, dataset, protocol.mode, splits
    )


def ablation(
    g: Hypergraph,
    protocol: ExperimentProtocol,
    mode: str,
    repetitions: int = 12,
    base_seed: int = 0,
    candidates: t.Sequence[Hyperlink] | None = None,
    dataset: str = "",
    run_config: t.Mapping[str, t.Any] | None = None,
) -> ExperimentReport:
    """
    :func:`run_experiment` restricted to node-based loops (``node-only``),
    hyperlink-based loops (``hyperlink-only``) or both (``full``).
    """
    return run_experiment(
        g,
        protocol.replace(mode=mode),
        repetitions=repetitions,
        base_seed=base_seed,
        candidates=candidates,
        dataset=dataset,
        run_config=run_config,
    )


__all__ = [
    "ExperimentReport",
    "RunResult",
    "SUMMARY_HEADER",
    "ablation",
    "run_experiment",
]
