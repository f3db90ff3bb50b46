"""Symbolic linear models: typed variables, a linear objective and named linear constraints."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

BINARY = "binary"
INTEGER = "integer"
CONTINUOUS = "continuous"

FORMULATIONS = ("RN-wS", "RN-noS", "CG-wS", "CG-noS")

INT_TOL = 1e-6
CONS_TOL = 1e-6


def natural_key(name: str) -> tuple:
    """Sort key splitting ``x_10_2_1`` into ``("x", 10, 2, 1)``."""
    parts = name.split("_")
    return tuple((0, int(p), "") if p.lstrip("-").isdigit() else (1, 0, p) for p in parts)


@dataclass
class Variable:
    name: str
    kind: str = CONTINUOUS
    lb: float = 0.0
    ub: float = math.inf

    def __post_init__(self):
        if self.kind == BINARY:
            self.lb, self.ub = 0.0, 1.0


@dataclass
class Constraint:
    name: str
    terms: dict[str, float]
    sense: str  # "<=", "=", ">="
    rhs: float

    def lhs(self, values: Mapping[str, float]) -> float:
        return sum(c * values.get(v, 0.0) for v, c in self.terms.items())

    def slack_violation(self, values: Mapping[str, float]) -> float:
        """Amount by which the constraint is violated (0 when satisfied)."""
        lhs = self.lhs(values)
        if self.sense == "<=":
            return max(0.0, lhs - self.rhs)
        if self.sense == ">=":
            return max(0.0, self.rhs - lhs)
        return abs(lhs - self.rhs)


@dataclass
class MilpModel:
    tag: str
    digest: str = ""
    variables: dict[str, Variable] = field(default_factory=dict)
    objective: dict[str, float] = field(default_factory=dict)
    constraints: list[Constraint] = field(default_factory=list)

    def add_var(self, name: str, kind: str = CONTINUOUS, lb: float = 0.0, ub: float = math.inf) -> str:
        if name in self.variables:
            raise ValueError(f"variable {name} declared twice")
        self.variables[name] = Variable(name, kind, lb, ub)
        return name

    def add_constraint(self, name: str, terms: Mapping[str, float], sense: str, rhs: float = 0.0):
        if sense not in ("<=", "=", ">="):
            raise ValueError(f"bad sense {sense}")
        merged: dict[str, float] = {}
        for v, c in terms.items():
            if v not in self.variables:
                raise KeyError(f"constraint {name} references undeclared variable {v}")
            merged[v] = merged.get(v, 0.0) + c
        merged = {v: c for v, c in merged.items() if c != 0}
        if not merged:
            return
        self.constraints.append(Constraint(name, merged, sense, rhs))

    def count(self, prefix: str) -> int:
        """Number of variables of one family, e.g. ``count("x")``."""
        return sum(1 for n in self.variables if n.split("_", 1)[0] == prefix)

    def constraint_family(self, prefix: str) -> list[Constraint]:
        return [c for c in self.constraints if c.name.split("_", 1)[0] == prefix]

    def objective_value(self, values: Mapping[str, float]) -> float:
        return sum(c * values.get(v, 0.0) for v, c in self.objective.items())

    def violations(self, values: Mapping[str, float], tol: float = CONS_TOL) -> list[str]:
        """Every bound, integrality or constraint violation of ``values`` (missing names read as 0)."""
        out = []
        for name in values:
            if name not in self.variables:
                out.append(f"unknown variable {name}")
        for var in self.variables.values():
            val = values.get(var.name, 0.0)
            if val < var.lb - tol or val > var.ub + tol:
                out.append(f"{var.name} = {val} outside [{var.lb}, {var.ub}]")
            if var.kind in (BINARY, INTEGER) and abs(val - round(val)) > INT_TOL:
                out.append(f"{var.name} = {val} is not integral")
        for con in self.constraints:
            gap = con.slack_violation(values)
            if gap > tol:
                out.append(f"{con.name}: violated by {gap:g}")
        return out

    def structurally_equal(self, other: "MilpModel") -> bool:
        def canon(model):
            return (
                model.tag,
                sorted((v.name, v.kind, v.lb, v.ub) for v in model.variables.values()),
                sorted(model.objective.items()),
                [(c.name, sorted(c.terms.items()), c.sense, c.rhs) for c in model.constraints],
            )

        return canon(self) == canon(other)
