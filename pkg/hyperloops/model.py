from __future__ import annotations

import dataclasses
import logging
import typing as t

import numpy as np
import scipy.linalg

from joblib import Parallel, delayed
from scipy.special import expit

from .config import DEFAULT_TAU_MAX, ModelConfig
from .exceptions import (
    ConfigError,
    DegenerateLabels,
    DimensionMismatch,
    InsufficientData,
    ModelError,
    NonConvergence,
)
from .hypergraph import Hypergraph
from .metrics import auc, stratified_folds
from .spectrum import PerturbationFeatures, extract_features


logger = logging.getLogger(__name__)

MODEL_FORMAT = 1
TIE_TOLERANCE = 1e-9


def design_row(f: PerturbationFeatures, gamma: float) -> np.ndarray:
    """
    The cardinality-scaled feature row ``|e|^-gamma * delta``.
    """
    if gamma < 0:
        raise ConfigError("gamma must be non-negative")
    return f.delta * float(f.cardinality) ** -gamma


class TrainingSet:
    """
    Labeled perturbation features: ``+1`` for observed hyperlinks, ``-1`` for
    candidates that are not.
    """

    def __init__(self, rows: t.Sequence[PerturbationFeatures]):
        rows = list(rows)
        if not rows:
            raise DegenerateLabels("The training set is empty")
        for f in rows:
            if f.label not in (1, -1):
                raise ModelError(f"Training labels must be +1 or -1, got {f.label!r}")
        widths = {len(f.delta) for f in rows}
        if len(widths) != 1:
            raise DimensionMismatch(f"Feature rows differ in length: {sorted(widths)}")

        self.rows = rows
        self.y = np.array([f.label for f in rows], dtype=np.float64)
        self.cardinalities = np.array([f.cardinality for f in rows], dtype=np.float64)
        self.deltas = np.vstack([f.delta for f in rows])

        if (self.y > 0).all() or (self.y < 0).all():
            raise DegenerateLabels("The training set needs both positive and negative rows")

    @classmethod
    def from_features(
        cls,
        positives: t.Sequence[PerturbationFeatures],
        negatives: t.Sequence[PerturbationFeatures],
    ) -> "TrainingSet":
        return cls(
            [f.with_label(1) for f in positives] + [f.with_label(-1) for f in negatives]
        )

    def __len__(self):
        return len(self.rows)

    @property
    def tau_max(self) -> int:
        return self.deltas.shape[1] // 2 + 1

    @property
    def labels(self) -> np.ndarray:
        return self.y.astype(np.int64)

    def design(self, gamma: float) -> np.ndarray:
        return self.deltas * (self.cardinalities**-gamma)[:, None]

    def subset(self, indices: t.Sequence[int]) -> "TrainingSet":
        return TrainingSet([self.rows[i] for i in indices])

    def truncate(self, tau_max: int) -> "TrainingSet":
        return TrainingSet([f.truncate(tau_max) for f in self.rows])

    def with_mode(self, mode: str) -> "TrainingSet":
        return TrainingSet([f.with_mode(mode) for f in self.rows])


@dataclasses.dataclass(frozen=True, eq=False)
class Standardization:
    """
    Per-feature ``(mean, scale)``. Constant features get scale 1 and are marked
    inactive, so their coefficient stays 0.
    """

    mean: np.ndarray
    scale: np.ndarray
    active: np.ndarray

    @classmethod
    def fit(cls, X: np.ndarray, enabled: bool = True) -> "Standardization":
        mean = X.mean(axis=0)
        std = X.std(axis=0)
        active = std > 1e-12 * np.maximum(1.0, np.abs(mean))
        if not enabled:
            return cls(np.zeros(X.shape[1]), np.ones(X.shape[1]), active)
        return cls(mean, np.where(active, std, 1.0), active)

    @classmethod
    def identity(cls, width: int) -> "Standardization":
        return cls(np.zeros(width), np.ones(width), np.ones(width, dtype=bool))

    def transform(self, X: np.ndarray) -> np.ndarray:
        return (X - self.mean) / self.scale


def _with_intercept(X: np.ndarray) -> np.ndarray:
    return np.hstack([np.ones((X.shape[0], 1)), X])


def log_likelihood(theta: np.ndarray, X: np.ndarray, y: np.ndarray, ridge: float) -> float:
    """
    The penalized log-likelihood ``sum log sigmoid(y * X theta) - ridge * |theta[1:]|^2``.
    The first column of ``X`` is the intercept, which is not penalized.
    """
    margin = y * (X @ theta)
    return float(-np.logaddexp(0.0, -margin).sum() - ridge * theta[1:] @ theta[1:])


def gradient(theta: np.ndarray, X: np.ndarray, y: np.ndarray, ridge: float) -> np.ndarray:
    margin = y * (X @ theta)
    penalty = 2.0 * ridge * theta
    penalty[0] = 0.0
    return X.T @ (y * expit(-margin)) - penalty


def hessian(theta: np.ndarray, X: np.ndarray, ridge: float) -> np.ndarray:
    p = expit(X @ theta)
    H = -(X.T * (p * (1.0 - p))) @ X
    diag = np.full(len(theta), 2.0 * ridge)
    diag[0] = 0.0
    return H - np.diag(diag)


@dataclasses.dataclass(frozen=True, eq=False)
class GammaFit:
    """
    The outcome of maximizing the likelihood at one fixed ``gamma``.
    """

    gamma: float
    coefficients: np.ndarray
    intercept: float
    log_likelihood: float
    iterations: int
    converged: bool
    history: tuple[float, ...]
    standardization: Standardization


def _newton(
    X: np.ndarray,
    y: np.ndarray,
    ridge: float,
    max_iterations: int,
    tolerance: float,
) -> tuple[np.ndarray, list[float], int, bool]:
    positive = float((y > 0).mean())
    theta = np.zeros(X.shape[1])
    theta[0] = np.log(positive / (1.0 - positive))

    ll = log_likelihood(theta, X, y, ridge)
    history = [ll]
    for iteration in range(1, max_iterations + 1):
        g = gradient(theta, X, y, ridge)
        H = hessian(theta, X, ridge)
        try:
            step = scipy.linalg.solve(-H, g, assume_a="pos")
        except (np.linalg.LinAlgError, scipy.linalg.LinAlgError):
            step = np.linalg.lstsq(-H, g, rcond=None)[0]

        t_ = 1.0
        while True:
            candidate = theta + t_ * step
            ll_new = log_likelihood(candidate, X, y, ridge)
            if ll_new >= ll:
                break
            t_ /= 2.0
            if t_ < 1e-10:
                # no ascent left; only an optimum if the gradient vanished
                stalled_at_optimum = float(np.linalg.norm(g)) < np.sqrt(tolerance)
                return theta, history, iteration, stalled_at_optimum

        change = ll_new - ll
        theta, ll = candidate, ll_new
        history.append(ll)
        if change < tolerance:
            return theta, history, iteration, True
    return theta, history, max_iterations, False


def fit_fixed_gamma(
    data: TrainingSet,
    gamma: float,
    ridge_lambda: float,
    *,
    standardize: bool = True,
    max_iterations: int = 100,
    tolerance: float = 1e-8,
    strict: bool = False,
) -> GammaFit:
    """
    Maximizes the (ridge-penalized) likelihood for a fixed scaling exponent with
    damped Newton steps, halving each step until the objective does not decrease.

    Non-convergence (iteration budget exhausted, or perfectly separated data with
    ``ridge_lambda == 0``) is logged and flagged with ``converged=False``; with
    ``strict=True`` it raises :class:`~hyperloops.NonConvergence` instead, carrying
    the best iterate.
    """
    if ridge_lambda < 0:
        raise ConfigError("ridge_lambda must be non-negative")

    raw = data.design(gamma)
    standardization = Standardization.fit(raw, enabled=standardize)
    active = standardization.active
    X = _with_intercept(standardization.transform(raw)[:, active])

    theta, history, iterations, converged = _newton(
        X, data.y, ridge_lambda, max_iterations, tolerance
    )
    if converged and ridge_lambda == 0 and (data.y * (X @ theta)).min() > 0:
        # separable data: the unpenalized optimum is at infinity
        converged = False

    coefficients = np.zeros(raw.shape[1])
    coefficients[active] = theta[1:]
    result = GammaFit(
        gamma=gamma,
        coefficients=coefficients,
        intercept=float(theta[0]),
        log_likelihood=history[-1],
        iterations=iterations,
        converged=converged,
        history=tuple(history),
        standardization=standardization,
    )
    if not converged:
        msg = (
            f"Likelihood maximization did not converge at gamma={gamma} "
            f"after {iterations} iterations"
        )
        if strict:
            raise NonConvergence(msg, best=result)
        logger.warning(msg)
    return result


@dataclasses.dataclass(frozen=True, eq=False)
class FittedModel:
    """
    The fitted predictor. Coefficients live in standardized space together with
    the transform: the linear predictor of a row ``x = |e|^-gamma * delta`` is
    ``intercept + <(alpha, beta), (x - mean) / scale>``.
    """

    tau_max: int
    gamma: float
    intercept: float
    alpha: np.ndarray
    beta: np.ndarray
    mean: np.ndarray
    scale: np.ndarray
    ridge_lambda: float
    log_likelihood: float = float("nan")
    iterations: int = 0
    converged: bool = True
    mode: str = "full"

    def __post_init__(self):
        width = self.tau_max - 1
        for name in ("alpha", "beta"):
            if len(getattr(self, name)) != width:
                raise DimensionMismatch(f"{name} must have length tau_max - 1 = {width}")
        for name in ("mean", "scale"):
            if len(getattr(self, name)) != 2 * width:
                raise DimensionMismatch(f"{name} must have length {2 * width}")
        if not (np.asarray(self.scale) > 0).all():
            raise ModelError("Standardization scales must be strictly positive")

    @classmethod
    def from_fit(
        cls, fit: GammaFit, tau_max: int, ridge_lambda: float, mode: str = "full"
    ) -> "FittedModel":
        width = tau_max - 1
        return cls(
            tau_max=tau_max,
            gamma=fit.gamma,
            intercept=fit.intercept,
            alpha=fit.coefficients[:width],
            beta=fit.coefficients[width:],
            mean=fit.standardization.mean,
            scale=fit.standardization.scale,
            ridge_lambda=ridge_lambda,
            log_likelihood=fit.log_likelihood,
            iterations=fit.iterations,
            converged=fit.converged,
            mode=mode,
        )

    @property
    def coefficients(self) -> np.ndarray:
        return np.concatenate([self.alpha, self.beta])

    def raw_coefficients(self) -> tuple[float, np.ndarray]:
        """
        ``(intercept, weights)`` acting directly on ``|e|^-gamma * delta``.
        """
        weights = self.coefficients / self.scale
        return float(self.intercept - weights @ self.mean), weights

    def linear_predictor(self, features: t.Sequence[PerturbationFeatures]) -> np.ndarray:
        width = 2 * (self.tau_max - 1)
        for f in features:
            if len(f.delta) != width:
                raise DimensionMismatch(
                    f"Model expects {width} features (tau_max={self.tau_max}), "
                    f"got {len(f.delta)}"
                )
        if not features:
            return np.zeros(0)
        rows = np.vstack([design_row(f, self.gamma) for f in features])
        return self.intercept + ((rows - self.mean) / self.scale) @ self.coefficients

    def dump(self, stream: t.TextIO, extra: t.Mapping[str, t.Any] | None = None) -> None:
        """
        Writes the model as ``key = value`` lines, floats with 17 significant
        digits so that loading reproduces predictions bit for bit.
        """
        from . import __version__

        def num(x: float) -> str:
            return format(float(x), ".17g")

        def vec(xs: np.ndarray) -> str:
            return " ".join(num(x) for x in xs)

        stream.write("# hyperloops model\n")
        for key, value in (extra or {}).items():
            stream.write(f"# {key}: {value}\n")
        lines = [
            ("format", MODEL_FORMAT),
            ("version", __version__),
            ("tau_max", self.tau_max),
            ("gamma", num(self.gamma)),
            ("lambda", num(self.ridge_lambda)),
            ("intercept", num(self.intercept)),
            ("alpha", vec(self.alpha)),
            ("beta", vec(self.beta)),
            ("mean", vec(self.mean)),
            ("scale", vec(self.scale)),
            ("log_likelihood", num(self.log_likelihood)),
            ("iterations", self.iterations),
            ("converged", "true" if self.converged else "false"),
            ("mode", self.mode),
        ]
        for key, value in lines:
            stream.write(f"{key} = {value}\n")

    @classmethod
    def load(cls, stream: t.TextIO) -> "FittedModel":
        values: dict[str, str] = {}
        for lineno, line in enumerate(stream, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise ModelError(f"Malformed model file at line {lineno}")
            values[key.strip()] = value.strip()

        def vec(key: str) -> np.ndarray:
            return np.array([float(x) for x in values[key].split()], dtype=np.float64)

        try:
            if int(values["format"]) != MODEL_FORMAT:
                raise ModelError(f"Unsupported model format {values['format']}")
            return cls(
                tau_max=int(values["tau_max"]),
                gamma=float(values["gamma"]),
                intercept=float(values["intercept"]),
                alpha=vec("alpha"),
                beta=vec("beta"),
                mean=vec("mean"),
                scale=vec("scale"),
                ridge_lambda=float(values["lambda"]),
                log_likelihood=float(values.get("log_likelihood", "nan")),
                iterations=int(values.get("iterations", 0)),
                converged=values.get("converged", "true") == "true",
                mode=values.get("mode", "full"),
            )
        except (KeyError, ValueError) as e:
            raise ModelError(f"Invalid model file: {e}")

    def save(self, path: str, extra: t.Mapping[str, t.Any] | None = None) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            self.dump(f, extra=extra)


def load_model(path: str) -> FittedModel:
    with open(path, encoding="utf-8") as f:
        return FittedModel.load(f)


def predict_proba(model: FittedModel, f: PerturbationFeatures) -> float:
    """
    ``P(e in E) = sigmoid(c + <(alpha, beta), standardized design_row(f, gamma)>)``.
    """
    return float(expit(model.linear_predictor([f])[0]))


def score_candidates(
    model: FittedModel, features: t.Sequence[PerturbationFeatures]
) -> np.ndarray:
    return expit(model.linear_predictor(features))


def _better(score: float, best: float | None) -> bool:
    if best is None:
        return True
    return score > best + TIE_TOLERANCE * max(1.0, abs(best))


def _fit_kwargs(config: ModelConfig) -> dict[str, t.Any]:
    return dict(
        standardize=config.standardize,
        max_iterations=config.max_iterations,
        tolerance=config.tolerance,
    )


def _validation_auc(
    data: TrainingSet,
    gamma: float,
    config: ModelConfig,
    folds: list[tuple[np.ndarray, np.ndarray]],
) -> float:
    scores = []
    for train_idx, valid_idx in folds:
        train = data.subset(train_idx)
        valid = data.subset(valid_idx)
        fit_ = fit_fixed_gamma(train, gamma, config.ridge_lambda, **_fit_kwargs(config))
        model = FittedModel.from_fit(fit_, train.tau_max, config.ridge_lambda)
        eta = model.linear_predictor(valid.rows)
        scores.append(auc(eta[valid.y > 0], eta[valid.y < 0]))
    return float(np.mean(scores))


def fit(
    data: TrainingSet,
    gamma_grid: t.Sequence[float] | None = None,
    ridge_lambda: float | None = None,
    config: ModelConfig | None = None,
    mode: str = "full",
    seed: int = 0,
    jobs: int | None = 1,
) -> FittedModel:
    """
    Line search over ``gamma``: fits every grid value and keeps the one with the
    highest training log-likelihood (or, with ``config.criterion ==
    "validation-auc"``, the highest mean fold AUC). Ties go to the smaller gamma.

    :param gamma_grid: Overrides ``config.gamma_grid``.
    :param ridge_lambda: Overrides ``config.ridge_lambda``.
    :param jobs: Worker count for fitting grid values in parallel.
    """
    config = config or ModelConfig()
    grid = sorted(set(gamma_grid if gamma_grid is not None else config.gamma_grid))
    if not grid:
        raise ConfigError("gamma_grid must not be empty")
    lam = config.ridge_lambda if ridge_lambda is None else ridge_lambda
    config = dataclasses.replace(config, ridge_lambda=lam)

    if mode != "full":
        data = data.with_mode(mode)

    fits: list[GammaFit] = Parallel(n_jobs=jobs or -1, prefer="threads")(
        delayed(fit_fixed_gamma)(data, gamma, lam, **_fit_kwargs(config))
        for gamma in grid
    )

    if config.criterion == "validation-auc":
        folds = stratified_folds(data.labels, config.folds, seed)
        criteria = [_validation_auc(data, gamma, config, folds) for gamma in grid]
    else:
        criteria = [f.log_likelihood for f in fits]

    best_fit, best_score = None, None
    for fit_, score in zip(fits, criteria):
        logger.debug("gamma=%.2f %s=%.10g", fit_.gamma, config.criterion, score)
        if _better(score, best_score):
            best_fit, best_score = fit_, score

    assert best_fit is not None
    model = FittedModel.from_fit(best_fit, data.tau_max, lam, mode=mode)
    logger.info(
        "Selected gamma=%.2f (tau_max=%d, log-likelihood=%.6f, iterations=%d)",
        model.gamma,
        model.tau_max,
        model.log_likelihood,
        model.iterations,
    )
    return model


def select_tau_from_features(
    data: TrainingSet,
    grid: t.Sequence[int],
    folds: int,
    seed: int,
    config: ModelConfig | None = None,
    mode: str = "full",
) -> int:
    """
    Picks the loop-length cutoff with the highest mean validation AUC over
    stratified folds. ``data`` must be extracted at ``max(grid)`` or above.
    """
    grid = sorted(set(grid))
    if len(grid) == 1:
        return grid[0]
    if max(grid) > data.tau_max:
        raise ConfigError(
            f"Features extracted at tau_max={data.tau_max} cannot serve tau={max(grid)}"
        )

    config = config or ModelConfig()
    splits = stratified_folds(data.labels, folds, seed)
    best_tau, best_score = None, None
    for tau in grid:
        truncated = data.truncate(tau)
        if mode != "full":
            truncated = truncated.with_mode(mode)
        scores = []
        for train_idx, valid_idx in splits:
            model = fit(truncated.subset(train_idx), config=config)
            valid = truncated.subset(valid_idx)
            eta = model.linear_predictor(valid.rows)
            scores.append(auc(eta[valid.y > 0], eta[valid.y < 0]))
        score = float(np.mean(scores))
        logger.debug("tau_c=%d mean validation AUC=%.6f", tau, score)
        if _better(score, best_score):
            best_tau, best_score = tau, score

    assert best_tau is not None
    logger.info("Selected tau_c=%d (mean validation AUC=%.4f)", best_tau, best_score)
    return best_tau


def select_tau_c(
    g: Hypergraph,
    candidates: t.Sequence[tuple[t.Iterable[int], int]],
    grid: t.Sequence[int],
    folds: int,
    seed: int,
    config: ModelConfig | None = None,
    jobs: int | None = 1,
) -> int:
    """
    Cross-validates the loop-length cutoff over labeled hyperlinks of ``g``.

    :param candidates: ``(hyperlink, label)`` pairs, label ``+1`` for observed
                       hyperlinks and ``-1`` for fake ones.
    :param grid: The cutoffs to try, typically ``6..14``.
    """
    config = config or ModelConfig()
    grid = sorted(set(grid))
    if not grid:
        raise ConfigError("The tau grid must not be empty")
    if len(grid) == 1:
        return grid[0]
    if _uses_default_tau(g, config):
        logger.info(
            "%d hyperlinks exceed %d, using the default tau_c=%d",
            g.m,
            config.large_threshold,
            DEFAULT_TAU_MAX,
        )
        return DEFAULT_TAU_MAX
    if len(candidates) < folds:
        raise InsufficientData(f"{len(candidates)} rows cannot be split into {folds} folds")

    hyperlinks = [e for e, _ in candidates]
    labels = [label for _, label in candidates]
    features = extract_features(g, hyperlinks, max(grid), labels=labels, jobs=jobs)
    return select_tau_from_features(TrainingSet(features), grid, folds, seed, config)


def _uses_default_tau(g: Hypergraph, config: ModelConfig) -> bool:
    return config.large_threshold is not None and g.m > config.large_threshold


def fit_hypergraph(
    g: Hypergraph,
    negatives: t.Sequence[t.Iterable[int]],
    config: ModelConfig | None = None,
    mode: str = "full",
    seed: int = 0,
    jobs: int | None = 1,
) -> tuple[FittedModel, list[PerturbationFeatures]]:
    """
    Fits the predictor on the hyperlinks of ``g`` (positives) against
    ``negatives``, picking the cutoff from ``config.tau_grid`` when one is set.
    Traces are computed once, at the largest cutoff needed.

    :return: The model, and the features of ``negatives`` at the model's cutoff.
    """
    config = config or ModelConfig()
    if config.tau_grid is None:
        tau_hi = config.tau_max
    elif _uses_default_tau(g, config):
        logger.info(
            "%d hyperlinks exceed %d, using the default tau_c=%d",
            g.m,
            config.large_threshold,
            DEFAULT_TAU_MAX,
        )
        tau_hi = DEFAULT_TAU_MAX
    else:
        tau_hi = max(config.tau_grid)

    positives = extract_features(g, g.hyperlinks, tau_hi, jobs=jobs)
    fakes = extract_features(g, negatives, tau_hi, jobs=jobs)
    data = TrainingSet.from_features(positives, fakes)

    tau = tau_hi
    if config.tau_grid is not None and not _uses_default_tau(g, config):
        tau = select_tau_from_features(
            data, config.tau_grid, config.folds, seed, config, mode=mode
        )
    if tau != tau_hi:
        data = data.truncate(tau)
        fakes = [f.truncate(tau) for f in fakes]

    model = fit(data, config=config, mode=mode, seed=seed, jobs=jobs)
    return model, fakes


__all__ = [
    "FittedModel",
    "GammaFit",
    "Standardization",
    "TrainingSet",
    "design_row",
    "fit",
    "fit_fixed_gamma",
    "fit_hypergraph",
    "gradient",
    "hessian",
    "load_model",
    "log_likelihood",
    "predict_proba",
    "score_candidates",
    "select_tau_c",
    "select_tau_from_features",
]
