"""Exception hierarchy shared across the package."""

from __future__ import annotations


class CovTourError(Exception):
    """Base class for all package errors."""


class ValidationError(CovTourError):
    """An instance, solution or parameter set violates an invariant.

    ``invariant`` names the violated rule (e.g. ``"capacity"``).
    """

    def __init__(self, invariant: str, message: str = ""):
        self.invariant = invariant
        super().__init__(f"{invariant}: {message}" if message else invariant)


class ParseError(CovTourError):
    """A document could not be parsed; ``locus`` points at the offending line or field."""

    def __init__(self, locus: str, message: str):
        self.locus = locus
        super().__init__(f"{locus}: {message}")


class InvalidParams(ValidationError):
    def __init__(self, message: str):
        super().__init__("params", message)


class Unreachable(ValidationError):
    def __init__(self, a: int, b: int):
        self.a, self.b = a, b
        super().__init__("strong_connectivity", f"no directed path from {a} to {b}")


class UncoverableDemandNode(ValidationError):
    def __init__(self, node: int):
        self.node = node
        super().__init__("coverage", f"demand node {node} has an empty preference list")


class Uncovered(CovTourError):
    def __init__(self, node: int):
        self.node = node
        super().__init__(f"no visited stop in the preference list of demand node {node}")


class NotEulerian(CovTourError):
    def __init__(self, vehicle: int, node: int):
        self.vehicle, self.node = vehicle, node
        super().__init__(f"vehicle {vehicle}: in-degree != out-degree at node {node}")


class Disconnected(CovTourError):
    def __init__(self, vehicle: int, node: int):
        self.vehicle, self.node = vehicle, node
        super().__init__(f"vehicle {vehicle}: loaded stop {node} is not connected to the depot")


class Infeasible(CovTourError):
    """No capacity-feasible routing exists (or none was found)."""


class LimitExceeded(CovTourError):
    """The exact solver was asked to handle an instance beyond its enumeration limits."""
