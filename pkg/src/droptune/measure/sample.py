from __future__ import annotations

import json
import math
import statistics
from dataclasses import dataclass, field

from droptune.space import Coordinate

OK, INVALID, TIMEOUT = "ok", "invalid", "timeout"
INF = math.inf


@dataclass(frozen=True)
class MeasureConfig:
    repeats: int = 10
    warmups: int = 2
    timeout_ms: float = 10_000.0
    alpha_converge: float = 0.05
    alpha_report: float = 0.01

    def __post_init__(self):
        if self.repeats < 3:
            raise ValueError("repeats must be >= 3 for the rank-sum test")
        if self.warmups < 0:
            raise ValueError("warmups must be >= 0")
        if self.timeout_ms <= 0:
            raise ValueError("timeout_ms must be positive")
        if not 0 < self.alpha_report <= self.alpha_converge < 1:
            raise ValueError("need 0 < alpha_report <= alpha_converge < 1")


@dataclass(frozen=True)
class Sample:
    coordinate: Coordinate
    timings: tuple[float, ...] = ()
    status: str = OK
    sketch: str = ""
    cost: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "coordinate", tuple(self.coordinate))
        object.__setattr__(self, "timings", tuple(float(t) for t in self.timings))
        if (self.status == OK) != bool(self.timings):
            raise ValueError("an ok sample needs timings, and only ok samples have them")
        cost = statistics.median(self.timings) if self.status == OK else INF
        object.__setattr__(self, "cost", cost)

    @property
    def ok(self) -> bool:
        return self.status == OK

    @classmethod
    def failed(cls, coordinate, status: str = INVALID, sketch: str = "") -> "Sample":
        return cls(tuple(coordinate), (), status, sketch)

    def to_record(self) -> dict:
        return {"coord": list(self.coordinate), "timings_ns": list(self.timings),
                "status": self.status, "cost_ns": self.cost if self.ok else None}

    def to_json(self) -> str:
        return json.dumps(self.to_record())

    @classmethod
    def from_record(cls, rec: dict) -> "Sample":
        return cls(tuple(rec["coord"]), tuple(rec["timings_ns"]), rec["status"],
                   rec.get("sketch", ""))
