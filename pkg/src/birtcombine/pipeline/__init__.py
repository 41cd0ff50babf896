"""Experiment orchestration and synthetic data."""

from __future__ import annotations

from .experiment import (
    ExperimentConfig,
    ExperimentReport,
    aggregate,
    run_experiment,
    run_on_data,
)
from .folds import FoldPlan, plan_folds
from .synth import (
    PRESETS,
    BirtTruth,
    ModelProfile,
    SynthCorpus,
    SynthCorpusConfig,
    band_counts,
    synth_birt_matrix,
    synth_corpus,
)

__all__ = [
    "BirtTruth", "ExperimentConfig", "ExperimentReport", "FoldPlan", "ModelProfile", "PRESETS",
    "SynthCorpus", "SynthCorpusConfig", "aggregate", "band_counts", "plan_folds", "run_experiment",
    "run_on_data", "synth_birt_matrix", "synth_corpus",
]
