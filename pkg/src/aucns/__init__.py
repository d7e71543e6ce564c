"""Implicit-feedback recommenders with popularity-aware negative sampling.

Trains BPR-style matrix factorization with pluggable negative samplers —
uniform, popularity-weighted, dynamic, and a partial-AUC-optimal rule that
weighs each candidate's chance of being a true negative — and evaluates
ranking quality alongside a popularity-bias metric suite. Brute-force probes
validate the underlying identities and derivatives.
"""

from .data import (
    InteractionDataset,
    LoadedRatings,
    PopularityProfile,
    RatingRecord,
    export_split,
    import_split,
    load_ratings,
    popularity_profile,
    to_implicit_and_split,
)
from .errors import (
    AucnsError,
    ConfigError,
    DegenerateDatasetError,
    EmptyDatasetError,
    ExperimentError,
    NumericalDegeneracyError,
    ParseError,
    SamplerError,
    TrainingError,
    UndefinedMetricError,
)
from .experiment import (
    ExperimentConfig,
    RunResult,
    config_hash,
    git_blob_sha1,
    run_experiment,
    sweep,
)
from .metrics import (
    EvalReport,
    RecommendationList,
    bias_metrics,
    evaluate,
    fpr_fnr,
    mse_metric,
    partial_auc,
    ranking_metrics,
    topk,
    topk_all,
)
from .mf import (
    EpochLog,
    FactorModel,
    LrDecay,
    TrainConfig,
    TrainResult,
    bpr_step,
    init_model,
    load_checkpoint,
    save_checkpoint,
    train,
)
from .probes import (
    BiasVarianceResult,
    OracleResult,
    SyntheticRegressionWorld,
    ToyRankingInstance,
    bias_variance_probe,
    pauc_rule_oracle,
    prop2_identity_check,
    random_ranking_instance,
    run_probe,
    surrogate_gradient_check,
)
from .rng import substream
from .rule import (
    AucnsBatchSampler,
    CandidateEvaluation,
    SamplerConfig,
    aucns_select,
    delta_minus,
    delta_minus_exact,
    delta_plus,
    delta_plus_exact,
    empirical_cdf,
    posterior_tn,
    prior_tn,
    top_gamma_count,
    top_gamma_scores,
)
from .samplers import (
    SamplerContext,
    dns_sample,
    make_batch_sampler,
    pns_sample,
    rns_sample,
)

__version__ = "0.1.0"

__all__ = [
    "AucnsBatchSampler",
    "AucnsError",
    "BiasVarianceResult",
    "CandidateEvaluation",
    "ConfigError",
    "DegenerateDatasetError",
    "EmptyDatasetError",
    "EpochLog",
    "EvalReport",
    "ExperimentConfig",
    "ExperimentError",
    "FactorModel",
    "InteractionDataset",
    "LoadedRatings",
    "LrDecay",
    "NumericalDegeneracyError",
    "OracleResult",
    "ParseError",
    "PopularityProfile",
    "RatingRecord",
    "RecommendationList",
    "RunResult",
    "SamplerConfig",
    "SamplerContext",
    "SamplerError",
    "SyntheticRegressionWorld",
    "ToyRankingInstance",
    "TrainConfig",
    "TrainResult",
    "TrainingError",
    "UndefinedMetricError",
    "aucns_select",
    "bias_metrics",
    "bias_variance_probe",
    "bpr_step",
    "config_hash",
    "delta_minus",
    "delta_minus_exact",
    "delta_plus",
    "delta_plus_exact",
    "dns_sample",
    "empirical_cdf",
    "evaluate",
    "export_split",
    "fpr_fnr",
    "git_blob_sha1",
    "import_split",
    "init_model",
    "load_checkpoint",
    "load_ratings",
    "make_batch_sampler",
    "mse_metric",
    "partial_auc",
    "pauc_rule_oracle",
    "pns_sample",
    "popularity_profile",
    "posterior_tn",
    "prior_tn",
    "prop2_identity_check",
    "random_ranking_instance",
    "ranking_metrics",
    "rns_sample",
    "run_experiment",
    "run_probe",
    "save_checkpoint",
    "substream",
    "surrogate_gradient_check",
    "sweep",
    "to_implicit_and_split",
    "top_gamma_count",
    "top_gamma_scores",
    "topk",
    "topk_all",
    "train",
]
