"""Uncertainty-weighted, test-time-augmented ensembling for ordinal
classifiers, with a calibration metrics suite (ECE, MCE, Brier, quadratic
weighted kappa) and a desk-scale synthetic experiment pipeline."""

from .core import (
    PredictionRecord,
    PredictionSet,
    make_prediction_set,
    validate_prediction_set,
)
from .metrics import (
    BinStat,
    CalibrationReport,
    brier,
    compute_bins,
    ece,
    full_report,
    mce,
    qwk,
)
from .uncertainty import (
    UncertaintyTable,
    build_uncertainty_table,
    ensemble_weights,
    llfu_sigma,
    model_scalar_prediction,
)
from .ensemble import (
    AggregationStrategy,
    run_strategy,
    tta_aggregate,
    weighted_ensemble,
)
from .augment import (
    AugmentationPlan,
    apply_plan,
    remove_black_background,
    resize_normalize,
    sample_plan,
)
from .image import RasterImage, read_image, write_image
from .toymodel import (
    SyntheticDataset,
    ToyClassifier,
    build_ensemble_predictions,
    generate_dataset,
    predict,
    train,
)
from .experiment import ExperimentConfig, run_experiment

__all__ = [
    "AggregationStrategy",
    "AugmentationPlan",
    "BinStat",
    "CalibrationReport",
    "ExperimentConfig",
    "PredictionRecord",
    "PredictionSet",
    "RasterImage",
    "SyntheticDataset",
    "ToyClassifier",
    "UncertaintyTable",
    "apply_plan",
    "brier",
    "build_ensemble_predictions",
    "build_uncertainty_table",
    "compute_bins",
    "ece",
    "ensemble_weights",
    "full_report",
    "generate_dataset",
    "llfu_sigma",
    "make_prediction_set",
    "mce",
    "model_scalar_prediction",
    "predict",
    "qwk",
    "read_image",
    "remove_black_background",
    "resize_normalize",
    "run_experiment",
    "run_strategy",
    "sample_plan",
    "train",
    "tta_aggregate",
    "validate_prediction_set",
    "weighted_ensemble",
    "write_image",
]
