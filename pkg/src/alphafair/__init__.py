"""Alpha-fair routing and spectrum allocation for elastic optical networks under tidal traffic."""

from alphafair.harness import ExperimentConfig, prepare_instance, run_sweep, solve_single
from alphafair.solver import Allocation, SolverConfig, brute_force_oracle, solve_alpha_fair, validate_allocation
from alphafair.welfare import welfare

__version__ = "0.1.0"

__all__ = [
    "Allocation",
    "ExperimentConfig",
    "SolverConfig",
    "brute_force_oracle",
    "prepare_instance",
    "run_sweep",
    "solve_alpha_fair",
    "solve_single",
    "validate_allocation",
    "welfare",
    "__version__",
]
