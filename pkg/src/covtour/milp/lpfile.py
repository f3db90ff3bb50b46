"""CPLEX-style LP text output and input, plus solver assignment files (``name value`` lines)."""

from __future__ import annotations

import math
import re
from typing import Iterable, Mapping

from ..errors import ParseError
from .model import BINARY, CONTINUOUS, INTEGER, Constraint, MilpModel, Variable, natural_key

LINE_WIDTH = 100


def _num(c: float) -> str:
    if c == 0:
        return "0"
    if float(c).is_integer() and abs(c) < 1e15:
        return str(int(c))
    return repr(float(c))


def _expr(terms: Mapping[str, float]) -> list[str]:
    tokens = []
    for k, name in enumerate(sorted(terms, key=natural_key)):
        c = terms[name]
        sign = "-" if c < 0 else "+"
        mag = abs(c)
        body = name if mag == 1 else f"{_num(mag)} {name}"
        if k == 0:
            tokens.append(f"- {body}" if sign == "-" else body)
        else:
            tokens.append(f"{sign} {body}")
    return tokens


def _wrap(head: str, tokens: Iterable[str]) -> list[str]:
    lines = []
    line = head
    for tok in tokens:
        if len(line) + 1 + len(tok) > LINE_WIDTH and line.strip():
            lines.append(line)
            line = "   " + tok
        else:
            line = f"{line} {tok}" if line else tok
    lines.append(line)
    return lines


def export_lp(model: MilpModel) -> bytes:
    """Serialize ``model`` deterministically (terms and variable lists in natural name order)."""
    out = [
        "\\ covtour MILP model",
        f"\\ formulation: {model.tag}",
        f"\\ instance: {model.digest}",
        "Minimize",
    ]
    out += _wrap(" obj:", _expr(model.objective))
    out.append("Subject To")
    for con in model.constraints:
        out += _wrap(f" {con.name}:", _expr(con.terms) + [con.sense, _num(con.rhs)])
    names = sorted(model.variables, key=natural_key)
    bounds = []
    for name in names:
        var = model.variables[name]
        if var.kind == BINARY:
            continue
        if math.isinf(var.ub):
            bounds.append(f" {name} >= {_num(var.lb)}")
        else:
            bounds.append(f" {_num(var.lb)} <= {name} <= {_num(var.ub)}")
    out.append("Bounds")
    out += bounds
    generals = [n for n in names if model.variables[n].kind == INTEGER]
    binaries = [n for n in names if model.variables[n].kind == BINARY]
    if generals:
        out.append("Generals")
        out += _wrap("", generals)
    if binaries:
        out.append("Binary")
        out += _wrap("", binaries)
    out.append("End")
    return ("\n".join(out) + "\n").encode("utf-8")


_SECTIONS = {
    "minimize": "obj",
    "minimum": "obj",
    "min": "obj",
    "subject to": "st",
    "such that": "st",
    "st": "st",
    "s.t.": "st",
    "bounds": "bounds",
    "bound": "bounds",
    "generals": "gen",
    "general": "gen",
    "gen": "gen",
    "binary": "bin",
    "binaries": "bin",
    "bin": "bin",
    "end": "end",
}
_LABEL = re.compile(r"(?:^|\s)([A-Za-z_][\w.\[\]]*)\s*:")
_TERM = re.compile(r"([+-])?\s*(\d+(?:\.\d*)?(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)?\s*([A-Za-z_][\w.\[\]]*)")


def _parse_expr(text: str, locus: str) -> dict[str, float]:
    terms: dict[str, float] = {}
    pos = 0
    text = text.strip()
    while pos < len(text):
        m = _TERM.match(text, pos)
        if not m or m.end() == pos:
            raise ParseError(locus, f"cannot parse expression near {text[pos:pos + 20]!r}")
        sign, coef, name = m.groups()
        value = float(coef) if coef else 1.0
        if sign == "-":
            value = -value
        terms[name] = terms.get(name, 0.0) + value
        pos = m.end()
        while pos < len(text) and text[pos].isspace():
            pos += 1
    return terms


def _parse_float(tok: str, locus: str) -> float:
    low = tok.lower().lstrip("+")
    if low in ("inf", "infinity"):
        return math.inf
    if low in ("-inf", "-infinity"):
        return -math.inf
    try:
        return float(tok)
    except ValueError as exc:
        raise ParseError(locus, f"expected a number, got {tok!r}") from exc


def _split_labeled(chunk: str) -> list[tuple[str, str]]:
    marks = list(_LABEL.finditer(chunk))
    items = []
    for k, mk in enumerate(marks):
        end = marks[k + 1].start() if k + 1 < len(marks) else len(chunk)
        items.append((mk.group(1), chunk[mk.end():end]))
    return items


def parse_lp(text: bytes | str) -> MilpModel:
    """Parse LP text produced by :func:`export_lp` (and the common subset of the dialect)."""
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    tag, digest = "", ""
    buckets: dict[str, list[tuple[int, str]]] = {k: [] for k in ("obj", "st", "bounds", "gen", "bin")}
    section = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if line.startswith("\\"):
            m = re.match(r"\\\s*formulation:\s*(\S+)", line)
            if m:
                tag = m.group(1)
            m = re.match(r"\\\s*instance:\s*(\S*)", line)
            if m:
                digest = m.group(1)
            continue
        if not line:
            continue
        key = line.lower()
        if key in _SECTIONS:
            section = _SECTIONS[key]
            if section == "end":
                break
            continue
        if section is None:
            raise ParseError(f"line {lineno}", "content before the first section")
        buckets[section].append((lineno, line))

    model = MilpModel(tag, digest)
    declared: dict[str, str] = {}
    for _, line in buckets["gen"]:
        for name in line.split():
            declared[name] = INTEGER
    for _, line in buckets["bin"]:
        for name in line.split():
            declared[name] = BINARY

    objective: dict[str, float] = {}
    obj_text = " ".join(l for _, l in buckets["obj"])
    if obj_text:
        labeled = _split_labeled(obj_text)
        body = labeled[0][1] if labeled else obj_text
        objective = _parse_expr(body, "objective")

    constraints = []
    st_text = " ".join(l for _, l in buckets["st"])
    first_line = buckets["st"][0][0] if buckets["st"] else 0
    for name, body in _split_labeled(st_text):
        m = re.match(r"(.*?)(<=|>=|=<|=>|<|>|=)\s*(\S+)\s*$", body.strip())
        if not m:
            raise ParseError(f"constraint {name} (section from line {first_line})", "missing sense or right-hand side")
        expr, sense, rhs = m.groups()
        sense = {"=<": "<=", "<": "<=", "=>": ">=", ">": ">="}.get(sense, sense)
        constraints.append((name, _parse_expr(expr, f"constraint {name}"), sense, _parse_float(rhs, f"constraint {name}")))

    bounds: dict[str, tuple[float, float]] = {}
    for lineno, line in buckets["bounds"]:
        locus = f"line {lineno}"
        parts = line.split()
        if len(parts) == 2 and parts[1].lower() == "free":
            bounds[parts[0]] = (-math.inf, math.inf)
        elif len(parts) == 5 and parts[1] in ("<=", "=<") and parts[3] in ("<=", "=<"):
            bounds[parts[2]] = (_parse_float(parts[0], locus), _parse_float(parts[4], locus))
        elif len(parts) == 3:
            name, op, val = parts
            lb, ub = bounds.get(name, (0.0, math.inf))
            v = _parse_float(val, locus)
            if op in (">=", "=>"):
                lb = v
            elif op in ("<=", "=<"):
                ub = v
            elif op == "=":
                lb = ub = v
            else:
                raise ParseError(locus, f"bad bound operator {op}")
            bounds[name] = (lb, ub)
        else:
            raise ParseError(locus, f"cannot parse bound {line!r}")

    seen = []
    for name in objective:
        seen.append(name)
    for _, terms, _, _ in constraints:
        seen.extend(terms)
    seen.extend(bounds)
    seen.extend(declared)
    for name in dict.fromkeys(seen):
        kind = declared.get(name, CONTINUOUS)
        lb, ub = bounds.get(name, (0.0, 1.0 if kind == BINARY else math.inf))
        model.variables[name] = Variable(name, kind, lb, ub)
    model.variables = {n: model.variables[n] for n in sorted(model.variables, key=natural_key)}
    model.objective = objective
    model.constraints = [Constraint(*args) for args in constraints]
    return model


def read_assignment(text: bytes | str) -> dict[str, float]:
    """Parse solver output with one ``name value`` pair per line; ``#`` starts a comment."""
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    values: dict[str, float] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ParseError(f"line {lineno}", f"expected 'name value', got {raw!r}")
        try:
            values[parts[0]] = float(parts[1])
        except ValueError as exc:
            raise ParseError(f"line {lineno}", f"bad value {parts[1]!r}") from exc
    return values


def write_assignment(values: Mapping[str, float], objective: float | None = None) -> bytes:
    lines = []
    if objective is not None:
        lines.append(f"# Objective value = {_num(objective)}")
    for name in sorted(values, key=natural_key):
        lines.append(f"{name} {_num(values[name])}")
    return ("\n".join(lines) + "\n").encode("utf-8")
