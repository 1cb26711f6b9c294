"""Experiment harness: comparisons, persistence and configuration in one namespace."""
from .experiments import (ComparisonReport, ExperimentConfig, LearningCurve, baseline_threshold,
                          compare_on_task, iterations_to_threshold, jumpstart, run_baseline_pg,
                          run_comparison, run_llrl_on_new_task, run_sequential, speedup)
from .io import (CURVE_HEADER, TRAINING_LOG_HEADER, ConfigError, SnapshotError, load_config,
                 load_snapshot, parse_config, save_snapshot, write_curves_csv,
                 write_training_log)

__all__ = [
    "ComparisonReport", "ExperimentConfig", "LearningCurve", "baseline_threshold",
    "compare_on_task", "iterations_to_threshold", "jumpstart", "run_baseline_pg",
    "run_comparison", "run_llrl_on_new_task", "run_sequential", "speedup",
    "CURVE_HEADER", "TRAINING_LOG_HEADER", "ConfigError", "SnapshotError", "load_config",
    "load_snapshot", "parse_config", "save_snapshot", "write_curves_csv", "write_training_log",
]
