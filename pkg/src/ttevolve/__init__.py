"""Tensor-train and Tucker time integrators for Schrödinger equations."""

from .errors import CapacityError, ConfigError, DimensionError, HermiticityError, SolverError, StateError
from .local import LocalSolveConfig
from .mpo import MPO, TimeDependentMpo, apply_mpo, expectation
from .mps import MPS, basis_state, compress, inner, norm, product_state, random_mps, to_vector
from .integrators import IntegratorConfig, StepReport, evolve, mps_bug_step, tdvp2_step, tdvp_step
from .termsum import Term, TermSumOperator
from .tucker import TuckerState, tucker_bug_step

__version__ = "0.1.0"

__all__ = [
    "CapacityError",
    "ConfigError",
    "DimensionError",
    "HermiticityError",
    "SolverError",
    "StateError",
    "LocalSolveConfig",
    "MPO",
    "TimeDependentMpo",
    "apply_mpo",
    "expectation",
    "MPS",
    "basis_state",
    "compress",
    "inner",
    "norm",
    "product_state",
    "random_mps",
    "to_vector",
    "IntegratorConfig",
    "StepReport",
    "evolve",
    "mps_bug_step",
    "tdvp2_step",
    "tdvp_step",
    "Term",
    "TermSumOperator",
    "TuckerState",
    "tucker_bug_step",
    "__version__",
]
