"""
The ``hyperloops`` command: fit, score, experiment, oracle, evaluate and stats.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import typing as t

from .baselines import ScorerRegistry, read_external_scores
from .config import (
    ABLATION_MODES,
    DEFAULT_FOLDS,
    DEFAULT_TAU_MAX,
    GAMMA_CRITERIA,
    ExperimentProtocol,
    ModelConfig,
    NegativeSamplerConfig,
    RunConfig,
    SplitSpec,
    parse_grid,
    parse_int_grid,
)
from .data import (
    parse_candidate_file,
    parse_hyperlink_file,
    read_hyperlinks,
    sample_negative_hyperlinks,
)
from .evaluation import run_experiment
from .exceptions import (
    BaselineError,
    ConfigError,
    EnumerationTooLarge,
    HypergraphError,
    HyperloopsError,
    MetricError,
    ModelError,
    SamplingError,
    SpectrumError,
    TestCountTooLarge,
)
from .hypergraph import Hypergraph, describe
from .metrics import evaluate_scores
from .model import fit_hypergraph, load_model, score_candidates
from .spectrum import count_loops_bruteforce, extract_features, trace_powers


logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_DATA_ERROR = 1
EXIT_FIT_ERROR = 2
EXIT_CONFIG_ERROR = 3
EXIT_ORACLE_MISMATCH = 4


def exit_code_for(error: BaseException) -> int:
    if isinstance(error, (ConfigError, EnumerationTooLarge, TestCountTooLarge)):
        return EXIT_CONFIG_ERROR
    if isinstance(error, (ModelError, SpectrumError, BaselineError)):
        return EXIT_FIT_ERROR
    if isinstance(error, (HypergraphError, SamplingError, MetricError, OSError)):
        return EXIT_DATA_ERROR
    return EXIT_FIT_ERROR


class ArgumentParser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(f"{self.prog}: {message}")


class CommandLine:
    def __init__(self, prog: str | None = None):
        self.parser = self._build_parser(prog)

    def _build_parser(self, prog: str | None) -> ArgumentParser:
        from . import __version__

        common = ArgumentParser(add_help=False)
        common.add_argument("--graph", help="Hyperlink file: one hyperlink per line")
        common.add_argument("--seed", type=int, default=0)
        common.add_argument(
            "--jobs",
            type=int,
            default=None,
            help="Worker count for feature extraction (default: every core)",
        )
        common.add_argument("--output", help="Output path (default: standard output)")
        common.add_argument("--drop-duplicates", action="store_true")
        common.add_argument("--drop-singletons", action="store_true")
        verbosity = common.add_mutually_exclusive_group()
        verbosity.add_argument("-v", "--verbose", action="count", default=0)
        verbosity.add_argument("-q", "--quiet", action="store_true")

        model = ArgumentParser(add_help=False)
        model.add_argument("--tau-max", type=int, default=None)
        model.add_argument("--tau-grid", type=parse_int_grid, default=None)
        model.add_argument("--gamma", type=parse_grid, default=None, help="min:step:max")
        model.add_argument("--lambda", dest="ridge_lambda", type=float, default=None)
        model.add_argument("--criterion", choices=GAMMA_CRITERIA, default="likelihood")
        model.add_argument("--folds", type=int, default=DEFAULT_FOLDS)
        model.add_argument("--ablation", choices=ABLATION_MODES, default="full")
        model.add_argument("--negatives", type=int, default=1200)

        parser = ArgumentParser(prog=prog, description="Hyperlink prediction from loops")
        parser.add_argument("--version", action="version", version=__version__)
        subparsers = parser.add_subparsers(dest="subcommand")

        fit = subparsers.add_parser(
            "fit", parents=[common, model], help="Fit a model and write it to --model"
        )
        fit.add_argument("--candidates", help="Fake hyperlinks used as negatives")
        fit.add_argument("--model", required=True)
        fit.set_defaults(cmd=self.fit)

        score = subparsers.add_parser(
            "score", parents=[common], help="Rank candidates with a fitted model"
        )
        score.add_argument("--model", required=True)
        score.add_argument("--candidates", required=True)
        score.add_argument("--tau-max", type=int, default=None)
        score.set_defaults(cmd=self.score)

        experiment = subparsers.add_parser(
            "experiment", parents=[common, model], help="Run the hold-out protocol"
        )
        experiment.add_argument(
            "--candidates", help="A fixed fake-hyperlink pool instead of sampling"
        )
        experiment.add_argument("--repetitions", type=int, default=12)
        experiment.add_argument("--test-count", type=int, default=400)
        experiment.add_argument("--baseline", choices=ScorerRegistry().names)
        experiment.add_argument("--timings", action="store_true")
        experiment.add_argument("--database", help="SQLAlchemy URI to store results in")
        experiment.set_defaults(cmd=self.experiment)

        oracle = subparsers.add_parser(
            "oracle", parents=[common], help="Compare loop counts with enumeration"
        )
        oracle.add_argument("--tau", type=int, required=True)
        oracle.add_argument("--kind", choices=("node", "hyperlink"), default="node")
        oracle.set_defaults(cmd=self.oracle)

        evaluate = subparsers.add_parser(
            "evaluate", parents=[common], help="Evaluate an external score file"
        )
        evaluate.add_argument("--external-scores", required=True)
        evaluate.add_argument(
            "--candidates", required=True, help="The true missing hyperlinks"
        )
        evaluate.set_defaults(cmd=self.evaluate)

        stats = subparsers.add_parser(
            "stats", parents=[common], help="Describe a hyperlink file"
        )
        stats.set_defaults(cmd=self.stats)

        return parser

    def main(self, argv: t.Sequence[str] | None = None) -> int:
        try:
            options = self.parser.parse_args(argv)
            if not hasattr(options, "cmd"):
                raise ConfigError("too few arguments")
            self._configure_logging(options)
            return options.cmd(options)
        except SystemExit as e:
            return e.code if isinstance(e.code, int) else EXIT_OK
        except (HyperloopsError, OSError) as e:
            print(f"error: {e}", file=sys.stderr)
            return exit_code_for(e)

    def _configure_logging(self, options: argparse.Namespace) -> None:
        if options.quiet:
            level = logging.ERROR
        elif options.verbose > 1:
            level = logging.DEBUG
        elif options.verbose:
            level = logging.INFO
        else:
            level = logging.WARNING
        logging.basicConfig(format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
        logging.getLogger("hyperloops").setLevel(level)

    def _run_config(self, options: argparse.Namespace, **known) -> RunConfig:
        skip = {
            "cmd",
            "subcommand",
            "verbose",
            "quiet",
            "graph",
            "candidates",
            "model",
            "output",
            "seed",
        }
        extras = {
            key: list(value) if isinstance(value, tuple) else value
            for key, value in vars(options).items()
            if key not in skip and key not in known
        }
        return RunConfig(
            subcommand=options.subcommand,
            graph=options.graph,
            candidates=getattr(options, "candidates", None),
            model_path=getattr(options, "model", None),
            output=options.output,
            seed=options.seed,
            jobs=options.jobs,
            options=extras,
            **known,
        )

    def _model_config(self, options: argparse.Namespace) -> ModelConfig:
        kwargs: dict[str, t.Any] = dict(
            tau_max=options.tau_max or DEFAULT_TAU_MAX,
            tau_grid=options.tau_grid,
            criterion=options.criterion,
            folds=options.folds,
        )
        if options.gamma is not None:
            kwargs["gamma_grid"] = options.gamma
        if options.ridge_lambda is not None:
            kwargs["ridge_lambda"] = options.ridge_lambda
        return ModelConfig(**kwargs)

    def _graph(self, options: argparse.Namespace) -> Hypergraph:
        if not options.graph:
            raise ConfigError("--graph is required")
        return parse_hyperlink_file(
            options.graph,
            drop_duplicates=options.drop_duplicates,
            drop_singletons=options.drop_singletons,
        )

    def _write(self, options: argparse.Namespace, text: str) -> None:
        if options.output:
            with open(options.output, "w", encoding="utf-8", newline="\n") as f:
                f.write(text)
        else:
            sys.stdout.write(text)

    def fit(self, options: argparse.Namespace) -> int:
        g = self._graph(options)
        config = self._model_config(options)
        if options.candidates:
            pool = parse_candidate_file(options.candidates, g)
            negatives = [e for e in pool if e not in g]
            if len(negatives) < len(pool):
                logger.warning(
                    "Skipping %d candidates that are observed hyperlinks",
                    len(pool) - len(negatives),
                )
        else:
            negatives = sample_negative_hyperlinks(
                g, NegativeSamplerConfig(options.negatives, options.seed)
            )

        model, _ = fit_hypergraph(
            g,
            negatives,
            config,
            mode=options.ablation,
            seed=options.seed,
            jobs=options.jobs,
        )
        echo = self._run_config(options).echo()
        model.save(options.model, extra={"config": json.dumps(echo, sort_keys=True)})
        logger.info("Wrote model to %s", options.model)
        return EXIT_OK

    def score(self, options: argparse.Namespace) -> int:
        from . import __version__

        model = load_model(options.model)
        g = self._graph(options)
        candidates = parse_candidate_file(options.candidates, g)
        tau = options.tau_max or model.tau_max
        features = extract_features(g, candidates, tau, jobs=options.jobs)
        if model.mode != "full":
            features = [f.with_mode(model.mode) for f in features]
        probabilities = score_candidates(model, features)

        rows = sorted(
            zip((g.hyperlink_id(e) for e in candidates), probabilities.tolist()),
            key=lambda row: (-row[1], row[0]),
        )
        echo = self._run_config(options).echo()
        lines = [
            f"# hyperloops {__version__}",
            f"# config: {json.dumps(echo, sort_keys=True)}",
            "# hyperlink\tprobability\trank",
        ]
        lines += [
            f"{key}\t{format(p, '.17g')}\t{rank}"
            for rank, (key, p) in enumerate(rows, start=1)
        ]
        self._write(options, "\n".join(lines) + "\n")
        return EXIT_OK

    def experiment(self, options: argparse.Namespace) -> int:
        g = self._graph(options)
        candidates = None
        source = "generated"
        if options.candidates:
            candidates = parse_candidate_file(options.candidates, g)
            source = "provided-file"

        protocol = ExperimentProtocol(
            split=SplitSpec(options.test_count, options.seed, source),
            sampler=NegativeSamplerConfig(options.negatives, options.seed),
            model=self._model_config(options),
            mode=options.ablation,
            method=options.baseline or "loops",
            jobs=options.jobs,
        )
        echo = self._run_config(options).echo()
        report = run_experiment(
            g,
            protocol,
            repetitions=options.repetitions,
            base_seed=options.seed,
            candidates=candidates,
            dataset=os.path.basename(options.graph),
            run_config=echo,
        )
        self._write(options, report.to_json(include_timings=options.timings))
        if options.output:
            for split in report.splits:
                with open(f"{options.output}.split{split.seed}", "w", encoding="utf-8") as f:
                    split.write_manifest(f, echo)
        logger.info("Summary: %s", report.summary_row().strip())

        if options.database:
            from .store import ReportStore

            experiment_id = ReportStore(options.database).save(
                report, include_timings=options.timings
            )
            logger.info("Stored experiment %d in %s", experiment_id, options.database)
        return EXIT_OK

    def oracle(self, options: argparse.Namespace) -> int:
        g = self._graph(options)
        if options.tau < 2:
            raise ConfigError("--tau must be at least 2")
        bruteforce = count_loops_bruteforce(g, options.tau, options.kind)
        M = g.adjacency if options.kind == "node" else g.intersection_profile
        trace = int(round(trace_powers(M, options.tau)[-1]))
        self._write(options, f"bruteforce: {bruteforce}\ntrace: {trace}\n")
        if bruteforce != trace:
            logger.error(
                "%s-based %d-loops disagree: enumeration %d, trace %d",
                options.kind,
                options.tau,
                bruteforce,
                trace,
            )
            return EXIT_ORACLE_MISMATCH
        return EXIT_OK

    def evaluate(self, options: argparse.Namespace) -> int:
        from . import __version__

        scores = read_external_scores(options.external_scores)
        positives = {
            "+".join(sorted(labels)) for _, labels in read_hyperlinks(options.candidates)
        }
        unscored = positives - scores.keys()
        if unscored:
            logger.warning("%d true missing hyperlinks have no score", len(unscored))
        auc_, precision = evaluate_scores(positives & scores.keys(), scores)
        result = {
            "version": __version__,
            "config": self._run_config(options).echo(),
            "auc": auc_,
            "precision": precision,
            "positives": len(positives & scores.keys()),
            "candidates": len(scores),
        }
        self._write(options, json.dumps(result, indent=2, sort_keys=True) + "\n")
        return EXIT_OK

    def stats(self, options: argparse.Namespace) -> int:
        summary = describe(self._graph(options)).as_dict()
        summary["dataset"] = os.path.basename(options.graph)
        self._write(options, json.dumps(summary, indent=2, sort_keys=True) + "\n")
        return EXIT_OK


def main(argv: t.Sequence[str] | None = None, prog: str | None = None) -> int:
    return CommandLine(prog=prog).main(argv=argv)


__all__ = [
    "CommandLine",
    "EXIT_CONFIG_ERROR",
    "EXIT_DATA_ERROR",
    "EXIT_FIT_ERROR",
    "EXIT_OK",
    "EXIT_ORACLE_MISMATCH",
    "exit_code_for",
    "main",
]


if __name__ == "__main__":
    sys.exit(main())
