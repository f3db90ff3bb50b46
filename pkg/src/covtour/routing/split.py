"""A-priori demand splitting into capacity fractions (20/10/5/1 percent pieces)."""

from __future__ import annotations

from fractions import Fraction
from typing import Mapping

from ..instance import Number

SPLIT_THRESHOLD = Fraction(1, 10)
PIECE_SHARES = (Fraction(1, 5), Fraction(1, 10), Fraction(1, 20), Fraction(1, 100))


def _exact(value: Number) -> Fraction:
    return value if isinstance(value, Fraction) else Fraction(value)


def _plain(value: Fraction) -> Number:
    return int(value) if value.denominator == 1 else value


def split_quantity(d: Number, Q: Number) -> list[Number]:
    """Pieces of one stop's load, largest first; loads under a tenth of ``Q`` stay whole."""
    d, Q = _exact(d), _exact(Q)
    if d <= 0:
        return []
    if d < SPLIT_THRESHOLD * Q:
        return [_plain(d)]
    pieces: list[Fraction] = []
    rest = d
    for share in PIECE_SHARES:
        size = share * Q
        count = int(rest // size)
        pieces += [size] * count
        rest -= size * count
    if rest > 0:
        pieces.append(rest)
    return [_plain(p) for p in pieces]


def split_demands(quantities: Mapping[int, Number], Q: Number) -> list[tuple[int, Number]]:
    """``(origin stop, piece)`` pairs for every stop with a positive load, stops in ascending order."""
    out = []
    for j in sorted(quantities):
        out += [(j, p) for p in split_quantity(quantities[j], Q)]
    return out
