"""Covering tour problems on road networks: instances, MILP export, exact and heuristic solving."""

__version__ = "0.1.0"
