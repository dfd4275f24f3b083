"""Semi-periodic activation library with a training and comparison harness
for univariate time series classification."""

__version__ = "0.1.0"

from .activations import (
    ACTIVATION_NAMES,
    ActivationKind,
    PropertyRecord,
    Subdifferential,
    activation,
    catalog,
    derivative,
    evaluate,
    subdifferential,
)
from .autodiff import Tape, Tensor
from .bench import ResultsStore, RunResult, TrainConfig, run_sweep
from .data import Dataset, load_dataset_pair, load_ucr_split, znormalize
from .models import ModelSpec, ModelState, build_fcn, build_mlp, init_params
from .properties import (
    FourierSeries,
    affine_collapse,
    check_limits,
    check_monotone,
    check_semi_periodicity,
    dead_region_trace,
    fourier_fit_demo,
    property_report,
)
from .stats import (
    AccuracyMatrix,
    average_ranks,
    build_report,
    friedman,
    holm_correct,
    pairwise_wtl,
    wilcoxon_signed_rank,
)

__all__ = [
    "ACTIVATION_NAMES",
    "ActivationKind",
    "PropertyRecord",
    "Subdifferential",
    "activation",
    "catalog",
    "derivative",
    "evaluate",
    "subdifferential",
    "Tape",
    "Tensor",
    "ResultsStore",
    "RunResult",
    "TrainConfig",
    "run_sweep",
    "Dataset",
    "load_dataset_pair",
    "load_ucr_split",
    "znormalize",
    "ModelSpec",
    "ModelState",
    "build_fcn",
    "build_mlp",
    "init_params",
    "FourierSeries",
    "affine_collapse",
    "check_limits",
    "check_monotone",
    "check_semi_periodicity",
    "dead_region_trace",
    "fourier_fit_demo",
    "property_report",
    "AccuracyMatrix",
    "average_ranks",
    "build_report",
    "friedman",
    "holm_correct",
    "pairwise_wtl",
    "wilcoxon_signed_rank",
]
