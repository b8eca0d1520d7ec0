"""Training strategies for class-imbalanced classifiers, built around
balanced-then-mixed mini-batches, with calibration-aware evaluation."""

from .data import (
    Dataset,
    SplitPlan,
    imbalance,
    load_csv,
    make_gaussian_mixture,
    make_ring,
    make_two_gaussians,
    save_csv,
    split,
    stratified_holdout,
)
from .harness import (
    DataSource,
    ExperimentConfig,
    KdeTable,
    ResultRow,
    ResultTable,
    build_dataset,
    export_mixed_distribution,
    export_surface,
    load_config,
    run_experiment,
    sweep_alpha,
)
from .metrics import MetricsReport, evaluate, gain, rank_methods
from .network import (
    AdamState,
    Network,
    TrainConfig,
    TrainHistory,
    TrainingDivergedError,
    adam_step,
    backward,
    forward,
    init_adam,
    init_network,
    load_checkpoint,
    loss,
    save_checkpoint,
    train,
)
from .sampling import (
    STRATEGIES,
    Batch,
    MiniBatchSampler,
    SamplerSpec,
    cost_weights,
    mix,
    sample_beta,
    smote_interpolate,
)

__version__ = "0.1.0"

__all__ = [
    "Dataset", "SplitPlan", "make_ring", "make_two_gaussians",
    "make_gaussian_mixture", "load_csv", "save_csv", "imbalance", "split",
    "stratified_holdout",
    "STRATEGIES", "Batch", "SamplerSpec", "MiniBatchSampler", "sample_beta",
    "mix", "smote_interpolate", "cost_weights",
    "Network", "AdamState", "TrainConfig", "TrainHistory",
    "TrainingDivergedError", "init_network", "forward", "loss", "backward",
    "init_adam", "adam_step", "train", "save_checkpoint", "load_checkpoint",
    "MetricsReport", "evaluate", "gain", "rank_methods",
    "DataSource", "ExperimentConfig", "ResultRow", "ResultTable", "KdeTable",
    "build_dataset", "run_experiment", "sweep_alpha", "export_surface",
    "export_mixed_distribution", "load_config",
    "__version__",
]
