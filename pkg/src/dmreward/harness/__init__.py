"""Experiment harness: configuration, CLI, ablation grids, CSV/SVG output."""

from .cli import main, run_experiment
from .config import build_train_config, load_config

__all__ = ["main", "run_experiment", "build_train_config", "load_config"]
