"""Experiment configs, presets, seeded runs and the command-line interface."""

from .config import ConfigError, ExperimentConfig, apply_overrides, from_dict, load_config
from .presets import list_presets, preset
from .runner import SUMMARY_FILE, TRACE_FILE, build_graph, build_problem, initial_point, run_experiment, run_single
from .seeding import PURPOSE, derive_seed, rng_for

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "PURPOSE",
    "SUMMARY_FILE",
    "TRACE_FILE",
    "apply_overrides",
    "build_graph",
    "build_problem",
    "derive_seed",
    "from_dict",
    "initial_point",
    "list_presets",
    "load_config",
    "preset",
    "rng_for",
    "run_experiment",
    "run_single",
]
