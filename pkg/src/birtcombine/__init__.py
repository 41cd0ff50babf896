"""Band-aware combination of regression score predictions using a Beta-IRT error model."""

from __future__ import annotations

from ._backend import NAME as BACKEND
from .birt import (
    BirtParams,
    FitConfig,
    ObservationMatrix,
    error_expectation,
    fit_birt,
    icc_expectation,
)
from .combiner import PredictionMatrix, build_error_matrix, combine, fit_combiner
from .errors import (
    BirtCombineError,
    DomainError,
    FitError,
    InputError,
    NumericError,
    StratificationError,
    UndefinedMetricError,
)
from .metrics import confusion, kappa, metric_report, pearson
from .scale import ScoreScale, band_of, band_score, load_scale

__version__ = "0.1.0"
__all__ = [
    "BACKEND", "BirtCombineError", "BirtParams", "DomainError", "FitConfig", "FitError", "InputError",
    "NumericError", "ObservationMatrix", "PredictionMatrix", "ScoreScale", "StratificationError",
    "UndefinedMetricError", "band_of", "band_score", "build_error_matrix", "combine", "confusion",
    "error_expectation", "fit_birt", "fit_combiner", "icc_expectation", "kappa", "load_scale",
    "metric_report", "pearson",
]
