from __future__ import annotations

import dataclasses
import typing as t

from .exceptions import ConfigError


DEFAULT_TAU_MAX = 8
TAU_GRID = tuple(range(6, 15))
GAMMA_GRID = tuple(round(0.1 * i, 10) for i in range(21))
RIDGE_LAMBDA = 1e-6
EPSILON = 1e-12
MAX_ITERATIONS = 100
TOLERANCE = 1e-8
DEFAULT_FOLDS = 5
LARGE_GRAPH_HYPERLINKS = 2000

ABLATION_MODES = ("full", "node-only", "hyperlink-only")
GAMMA_CRITERIA = ("likelihood", "validation-auc")
CANDIDATE_SOURCES = ("generated", "provided-file")


def parse_grid(spec: str) -> tuple[float, ...]:
    """
    Parses a ``min:step:max`` grid, both ends inclusive. For example::

        parse_grid('0:0.1:2') -> (0.0, 0.1, ..., 2.0)
        parse_grid('0.5:0.1:0.5') -> (0.5,)

    A bare number is a singleton grid.
    """
    parts = spec.split(":")
    try:
        values = [float(p) for p in parts]
    except ValueError:
        raise ConfigError(f"Invalid grid {spec!r}, expected min:step:max")

    if len(values) == 1:
        return (values[0],)
    if len(values) != 3:
        raise ConfigError(f"Invalid grid {spec!r}, expected min:step:max")

    lo, step, hi = values
    if hi < lo:
        raise ConfigError(f"Invalid grid {spec!r}: max is smaller than min")
    if step <= 0:
        if hi == lo:
            return (lo,)
        raise ConfigError(f"Invalid grid {spec!r}: step must be positive")

    count = int(round((hi - lo) / step)) + 1
    return tuple(round(lo + i * step, 10) for i in range(count))


def parse_int_grid(spec: str) -> tuple[int, ...]:
    """
    Parses an integer grid, either ``6..14``, ``6:1:14`` or a comma list ``6,8,10``.
    """
    try:
        if ".." in spec:
            lo, hi = spec.split("..")
            values = tuple(range(int(lo), int(hi) + 1))
        elif ":" in spec:
            values = tuple(int(round(v)) for v in parse_grid(spec))
        else:
            values = tuple(int(v) for v in spec.split(","))
    except ValueError:
        raise ConfigError(f"Invalid integer grid {spec!r}")
    if not values:
        raise ConfigError(f"Empty integer grid {spec!r}")
    return values


class _AsDictMixin:
    def as_dict(self) -> dict[str, t.Any]:
        rv = {}
        for field in dataclasses.fields(self):  # type: ignore[arg-type]
            value = getattr(self, field.name)
            if isinstance(value, _AsDictMixin):
                value = value.as_dict()
            elif isinstance(value, tuple):
                value = list(value)
            rv[field.name] = value
        return rv


@dataclasses.dataclass(frozen=True)
class ModelConfig(_AsDictMixin):
    """
    Settings for fitting the loop-based predictor.

    When ``tau_grid`` is set, the cutoff is picked from it by cross-validation
    and ``tau_max`` is ignored.
    """

    tau_max: int = DEFAULT_TAU_MAX
    tau_grid: tuple[int, ...] | None = None
    gamma_grid: tuple[float, ...] = GAMMA_GRID
    ridge_lambda: float = RIDGE_LAMBDA
    standardize: bool = True
    criterion: str = "likelihood"
    folds: int = DEFAULT_FOLDS
    max_iterations: int = MAX_ITERATIONS
    tolerance: float = TOLERANCE
    large_threshold: int | None = LARGE_GRAPH_HYPERLINKS

    def __post_init__(self):
        if self.tau_max < 2:
            raise ConfigError("tau_max must be at least 2")
        if self.tau_grid is not None and (
            not self.tau_grid or min(self.tau_grid) < 2
        ):
            raise ConfigError("tau_grid must be non-empty with values of at least 2")
        if not self.gamma_grid:
            raise ConfigError("gamma_grid must not be empty")
        if min(self.gamma_grid) < 0:
            raise ConfigError("gamma values must be non-negative")
        if self.ridge_lambda < 0:
            raise ConfigError("ridge_lambda must be non-negative")
        if self.criterion not in GAMMA_CRITERIA:
            raise ConfigError(f"criterion must be one of {', '.join(GAMMA_CRITERIA)}")
        if self.folds < 2:
            raise ConfigError("folds must be at least 2")


@dataclasses.dataclass(frozen=True)
class SplitSpec(_AsDictMixin):
    """
    How held-out positives are drawn: ``test_count`` hyperlinks deleted uniformly
    at random, deterministic given ``seed``.
    """

    test_count: int = 400
    seed: int = 0
    candidate_source: str = "generated"

    def __post_init__(self):
        if self.test_count < 0:
            raise ConfigError("test_count must be non-negative")
        if self.candidate_source not in CANDIDATE_SOURCES:
            raise ConfigError(
                f"candidate_source must be one of {', '.join(CANDIDATE_SOURCES)}"
            )


@dataclasses.dataclass(frozen=True)
class NegativeSamplerConfig(_AsDictMixin):
    """
    How fake hyperlinks are generated. ``max_rejections`` defaults to 1000 x count.
    """

    count: int = 1200
    seed: int = 0
    max_rejections: int | None = None

    def __post_init__(self):
        if self.count < 1:
            raise ConfigError("count must be at least 1")

    @property
    def rejection_budget(self) -> int:
        if self.max_rejections is None:
            return 1000 * self.count
        return self.max_rejections


@dataclasses.dataclass(frozen=True)
class ExperimentProtocol(_AsDictMixin):
    split: SplitSpec = dataclasses.field(default_factory=SplitSpec)
    sampler: NegativeSamplerConfig = dataclasses.field(
        default_factory=NegativeSamplerConfig
    )
    model: ModelConfig = dataclasses.field(default_factory=ModelConfig)
    mode: str = "full"
    method: str = "loops"
    jobs: int | None = 1

    def __post_init__(self):
        if self.mode not in ABLATION_MODES:
            raise ConfigError(f"mode must be one of {', '.join(ABLATION_MODES)}")

    def replace(self, **changes) -> "ExperimentProtocol":
        return dataclasses.replace(self, **changes)


@dataclasses.dataclass(frozen=True)
class RunConfig(_AsDictMixin):
    """
    The effective configuration of one CLI invocation, echoed into every output.
    """

    subcommand: str
    graph: str | None = None
    candidates: str | None = None
    model_path: str | None = None
    output: str | None = None
    seed: int = 0
    repetitions: int = 12
    jobs: int | None = 1
    options: dict[str, t.Any] = dataclasses.field(default_factory=dict)

    def echo(self) -> dict[str, t.Any]:
        """
        The configuration as embedded in output artifacts. Worker count and output
        path are left out so that outputs do not depend on them.
        """
        rv = self.as_dict()
        del rv["jobs"], rv["output"]
        rv["options"] = {k: v for k, v in sorted(rv["options"].items()) if k != "jobs"}
        return rv


__all__ = [
    "ABLATION_MODES",
    "DEFAULT_TAU_MAX",
    "EPSILON",
    "GAMMA_GRID",
    "RIDGE_LAMBDA",
    "TAU_GRID",
    "ExperimentProtocol",
    "ModelConfig",
    "NegativeSamplerConfig",
    "RunConfig",
    "SplitSpec",
    "parse_grid",
    "parse_int_grid",
]
