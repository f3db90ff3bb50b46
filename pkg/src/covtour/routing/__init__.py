"""Phase 2 routing: demand splitting, the CVRP engine and the merge back to tours."""

from .hgs import CvrpSolution, CvrpTask, HgsParams, make_task, solve_cvrp
from .phase2 import BestCell, CoverReport, merge_to_solution, route_cover, run_phase2, sequential_fill
from .split import split_demands, split_quantity

__all__ = [
    "BestCell",
    "CoverReport",
    "CvrpSolution",
    "CvrpTask",
    "HgsParams",
    "make_task",
    "merge_to_solution",
    "route_cover",
    "run_phase2",
    "sequential_fill",
    "solve_cvrp",
    "split_demands",
    "split_quantity",
]
