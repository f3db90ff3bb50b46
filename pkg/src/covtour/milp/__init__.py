"""MILP formulations: symbolic models, LP-file output, solution encoding and decoding."""

from .decode import decode_solution, raw_objective, raw_travel
from .encode import encode
from .formulations import BUILDERS, build, build_cg_nos, build_cg_ws, build_rn_nos, build_rn_ws
from .lpfile import export_lp, parse_lp, read_assignment, write_assignment
from .model import FORMULATIONS, Constraint, MilpModel, Variable

__all__ = [
    "BUILDERS",
    "FORMULATIONS",
    "Constraint",
    "MilpModel",
    "Variable",
    "build",
    "build_cg_nos",
    "build_cg_ws",
    "build_rn_nos",
    "build_rn_ws",
    "decode_solution",
    "encode",
    "export_lp",
    "parse_lp",
    "raw_objective",
    "raw_travel",
    "read_assignment",
    "write_assignment",
]
