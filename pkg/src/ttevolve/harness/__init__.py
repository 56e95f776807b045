"""Experiment configuration, runner and command-line interface."""

from .config import ExperimentConfig, from_dict, load_config
from .runner import (
    convergence_study,
    epsilon_sweep,
    magnetization_study,
    paper_eps_grid,
    run_experiment,
    scaling_study,
)

__all__ = [
    "ExperimentConfig",
    "from_dict",
    "load_config",
    "convergence_study",
    "epsilon_sweep",
    "magnetization_study",
    "paper_eps_grid",
    "run_experiment",
    "scaling_study",
]
