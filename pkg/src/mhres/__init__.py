"""Design of domestic PV + battery systems with multistage multi-horizon stochastic MILPs."""
from .audit import check_feasibility, evaluate_cost
from .bounds import bound_mhev, bound_mhoev, bound_smc, bound_smg, bound_sws, run_bound, vsd
from .heuristics import Sfr3Params, sfr3, srh
from .instance import Instance, InstanceError, load_instance, save_instance
from .milp import AbstractMilp, SolveOutcome, SolverControls, solve
from .model import Variant, build_model
from .solution import Solution, load_solution, save_solution, solution_from_outcome
from .tree import MultiHorizonTree, Stage

__version__ = "0.1.0"

__all__ = [
    "AbstractMilp", "Instance", "InstanceError", "MultiHorizonTree", "Solution", "SolveOutcome",
    "SolverControls", "Stage", "Variant", "build_model", "load_instance", "load_solution",
    "save_instance", "save_solution", "solution_from_outcome", "solve",
    "Sfr3Params", "bound_mhev", "bound_mhoev", "bound_smc", "bound_smg", "bound_sws", "check_feasibility",
    "evaluate_cost", "run_bound", "sfr3", "srh", "vsd",
]
