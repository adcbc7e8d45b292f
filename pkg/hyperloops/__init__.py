from __future__ import annotations


__version__ = "0.1.0"

from .baselines import (
    KatzConfig,
    ScorerRegistry,
    cn_score,
    default_katz_grid,
    katz_matrix,
    katz_score,
    read_external_scores,
    select_katz_damping,
    spectral_radius,
)
from .config import (
    ExperimentProtocol,
    ModelConfig,
    NegativeSamplerConfig,
    RunConfig,
    SplitSpec,
    parse_grid,
    parse_int_grid,
)
from .data import (
    Split,
    parse_candidate_file,
    parse_hyperlink_file,
    read_hyperlinks,
    read_split_manifest,
    sample_negative_hyperlinks,
    split_train_test,
    write_hyperlink_file,
    write_split_manifest,
)
from .evaluation import ExperimentReport, RunResult, ablation, run_experiment
from .exceptions import *
from .hypergraph import (
    Hyperlink,
    Hypergraph,
    HypergraphSummary,
    adjacency,
    build_hypergraph,
    describe,
    intersection_profile,
    with_hyperlink,
    without_hyperlink,
)
from .metrics import auc, evaluate_scores, precision_at, stratified_folds
from .model import (
    FittedModel,
    TrainingSet,
    fit,
    fit_fixed_gamma,
    fit_hypergraph,
    load_model,
    predict_proba,
    score_candidates,
    select_tau_c,
)
from .spectrum import (
    LoopSpectrum,
    PerturbationFeatures,
    count_loops_bruteforce,
    extract_features,
    perturbation_features,
    spectrum,
    trace_powers,
)
from .synthetic import planted_hypergraph
