"""Discrete annotation spaces: parameters, coordinates and neighborhoods.

A coordinate is a plain tuple of indices, one per parameter, each indexing
into that parameter's ordered value list.
"""

from __future__ import annotations

import json
import math
import sys
from dataclasses import dataclass
from typing import Iterator, Sequence

Coordinate = tuple[int, ...]

PARAM_KINDS = ("tile", "unroll", "parallel", "flag", "other")


class DimensionMismatch(ValueError):
    """Raised when a coordinate does not fit the space it is used with."""


@dataclass(frozen=True)
class ParamDef:
    name: str
    values: tuple[int, ...]
    kind: str = "other"

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(int(v) for v in self.values))
        if not self.values:
            raise ValueError(f"parameter {self.name!r} has no values")
        if any(b <= a for a, b in zip(self.values, self.values[1:])):
            raise ValueError(f"values of {self.name!r} must be strictly increasing")
        if self.kind not in PARAM_KINDS:
            raise ValueError(f"unknown parameter kind {self.kind!r}")

    def __len__(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class SearchSpace:
    params: tuple[ParamDef, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "params", tuple(self.params))
        names = [p.name for p in self.params]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate parameter names in {names}")

    @property
    def dimension(self) -> int:
        return len(self.params)

    @property
    def cardinalities(self) -> tuple[int, ...]:
        return tuple(len(p) for p in self.params)

    def size(self) -> int:
        return math.prod(self.cardinalities)

    def check(self, c: Sequence[int]) -> Coordinate:
        """Return `c` as a Coordinate, raising DimensionMismatch if invalid."""
        if len(c) != self.dimension:
            raise DimensionMismatch(
                f"coordinate has {len(c)} indices, space has {self.dimension} dimensions")
        for i, (idx, card) in enumerate(zip(c, self.cardinalities)):
            if not 0 <= idx < card:
                raise DimensionMismatch(
                    f"index {idx} out of range for {self.params[i].name!r} ({card} values)")
        return tuple(int(i) for i in c)

    def contains(self, c: Sequence[int]) -> bool:
        try:
            self.check(c)
        except DimensionMismatch:
            return False
        return True

    def neighbors(self, c: Sequence[int]) -> list[Coordinate]:
        """Axis-aligned single-index steps around `c`, clamped at the borders.

        Ordered dimension-major, the minus step before the plus step.
        """
        c = self.check(c)
        out = []
        for d, card in enumerate(self.cardinalities):
            for step in (-1, 1):
                idx = c[d] + step
                if 0 <= idx < card:
                    out.append(c[:d] + (idx,) + c[d + 1:])
        return out

    def enumerate(self) -> Iterator[Coordinate]:
        """Every coordinate once, row-major (last parameter varies fastest)."""
        if self.size() > sys.maxsize:
            raise OverflowError(f"space of size {self.size()} is too large to enumerate")
        return _row_major(self.cardinalities)

    def values_of(self, c: Sequence[int]) -> dict[str, int]:
        c = self.check(c)
        return {p.name: p.values[i] for p, i in zip(self.params, c)}

    def index_of(self, name: str) -> int:
        for i, p in enumerate(self.params):
            if p.name == name:
                return i
        raise KeyError(name)

    def to_flat(self, c: Sequence[int]) -> int:
        flat = 0
        for idx, card in zip(self.check(c), self.cardinalities):
            flat = flat * card + idx
        return flat

    def from_flat(self, flat: int) -> Coordinate:
        if not 0 <= flat < self.size():
            raise IndexError(flat)
        out = []
        for card in reversed(self.cardinalities):
            flat, idx = divmod(flat, card)
            out.append(idx)
        return tuple(reversed(out))

    def origin(self) -> Coordinate:
        return (0,) * self.dimension

    def to_json(self) -> dict:
        return {"params": [{"name": p.name, "kind": p.kind, "values": list(p.values)}
                           for p in self.params]}

    @classmethod
    def from_json(cls, doc: dict | str) -> "SearchSpace":
        if isinstance(doc, str):
            doc = json.loads(doc)
        return cls(tuple(ParamDef(p["name"], tuple(p["values"]), p.get("kind", "other"))
                         for p in doc["params"]))


def _row_major(cards: tuple[int, ...]) -> Iterator[Coordinate]:
    if any(c == 0 for c in cards):
        return
    idx = [0] * len(cards)
    while True:
        yield tuple(idx)
        d = len(cards) - 1
        while d >= 0:
            idx[d] += 1
            if idx[d] < cards[d]:
                break
            idx[d] = 0
            d -= 1
        if d < 0:
            return


def neighbors(space: SearchSpace, c: Sequence[int]) -> list[Coordinate]:
    return space.neighbors(c)


def size(space: SearchSpace) -> int:
    return space.size()


def enumerate_space(space: SearchSpace) -> Iterator[Coordinate]:
    return space.enumerate()


def coordinate_to_json(c: Sequence[int]) -> list[int]:
    return [int(i) for i in c]


def coordinate_from_json(doc: list | str) -> Coordinate:
    if isinstance(doc, str):
        doc = json.loads(doc)
    return tuple(int(i) for i in doc)
