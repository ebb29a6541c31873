"""Deterministic synthetic cost landscapes over a SearchSpace.

Costs are in nanoseconds. Every landscape is minimized at a seeded target
coordinate whose cost equals `scale`, the family's analytic minimum.
"""

from __future__ import annotations

import hashlib
import math
import random
import threading
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from droptune.measure.sample import INVALID, OK, TIMEOUT, MeasureConfig, Sample
from droptune.space import Coordinate, SearchSpace

FAMILIES = ("separable_convex", "correlated_valley", "rugged", "plateau")

RUGGED_AMPLITUDE = 0.3
PLATEAU_STEP = 0.25


def unit_hash(*parts) -> float:
    """Platform-independent hash of `parts` to a float in [0, 1)."""
    digest = hashlib.blake2b(repr(parts).encode(), digest_size=8).digest()
    return int.from_bytes(digest, "little") / 2.0 ** 64


@dataclass(eq=False)
class Landscape:
    space: SearchSpace
    family: str = "separable_convex"
    seed: int = 0
    invalid_fraction: float = 0.0
    noise_rel: float = 0.0
    scale: float = 1e6
    key: str = "landscape"
    worker_cap = None

    _calls: dict = field(default_factory=lambda: defaultdict(int), repr=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown landscape family {self.family!r}; expected one of {FAMILIES}")
        if not 0 <= self.invalid_fraction < 1:
            raise ValueError("invalid_fraction must lie in [0, 1)")
        if self.noise_rel < 0:
            raise ValueError("noise_rel must be >= 0")
        rng = random.Random(f"{self.family}/{self.seed}")
        cards = self.space.cardinalities
        self.target: Coordinate = tuple(rng.randrange(c) for c in cards)
        self.weights = tuple(rng.uniform(0.5, 2.0) for _ in cards)
        d = len(cards)
        bound = 1.8 * min(self.weights, default=1.0) / max(d - 1, 1)
        # |cross| kept small enough that the quadratic form stays positive definite
        self.cross = {(i, j): rng.uniform(-bound, bound)
                      for i in range(d) for j in range(i + 1, d)}
        self._invalid: frozenset[int] | None = None

    # -- cost function --------------------------------------------------------

    def _offsets(self, c: Sequence[int]) -> list[float]:
        return [(i - t) / max(card - 1, 1)
                for i, t, card in zip(c, self.target, self.space.cardinalities)]

    def value(self, c: Sequence[int]) -> float:
        """Noise-free cost of `c` (ignores invalid masking)."""
        d = self._offsets(c)
        q = sum(w * x * x for w, x in zip(self.weights, d))
        if self.family == "correlated_valley":
            q += sum(v * d[i] * d[j] for (i, j), v in self.cross.items())
        elif self.family == "plateau":
            q = PLATEAU_STEP * math.floor(q / PLATEAU_STEP)
        cost = self.scale * (1.0 + q)
        if self.family == "rugged" and tuple(c) != self.target:
            cost *= 1.0 + RUGGED_AMPLITUDE * unit_hash("rugged", self.seed, tuple(c))
        return cost

    @property
    def minimum(self) -> float:
        return self.scale

    def invalid_set(self) -> frozenset[int]:
        if self._invalid is None:
            size = self.space.size()
            k = math.floor(self.invalid_fraction * size)
            if k == 0:
                self._invalid = frozenset()
            else:
                rng = random.Random(f"mask/{self.family}/{self.seed}")
                tflat = self.space.to_flat(self.target)
                picked = [f for f in rng.sample(range(size), min(size, k + 1)) if f != tflat]
                self._invalid = frozenset(picked[:k])
        return self._invalid

    def is_invalid(self, c: Sequence[int]) -> bool:
        return self.invalid_fraction > 0 and self.space.to_flat(c) in self.invalid_set()

    # -- measurement backend --------------------------------------------------

    def evaluate(self, c: Sequence[int], cfg: MeasureConfig, call_index: int | None = None
                 ) -> Sample:
        c = self.space.check(c)
        if self.is_invalid(c):
            return Sample.failed(c, INVALID, self.key)
        if call_index is None:
            with self._lock:
                call_index = self._calls[c]
                self._calls[c] += 1
        base = self.value(c)
        if base >= cfg.timeout_ms * 1e6:
            return Sample.failed(c, TIMEOUT, self.key)
        if self.noise_rel == 0:
            timings = (base,) * cfg.repeats
        else:
            timings = tuple(
                base * (1 + self.noise_rel * (2 * unit_hash("noise", self.seed, c, call_index, r) - 1))
                for r in range(cfg.repeats))
        return Sample(c, timings, OK, self.key)

    def prepare(self, coords) -> None:
        pass


class SyntheticBackend:
    """Schedule-level backend assigning every sketch its own seeded Landscape.

    Sketches with more transformations get a lower base cost on average, and
    each sketch's base cost is perturbed by a seeded factor. `workload_scale`
    optionally multiplies the costs of whole workloads, keyed by name.
    """

    worker_cap = None

    def __init__(self, family: str = "rugged", seed: int = 0, invalid_fraction: float = 0.0,
                 noise_rel: float = 0.0, base_ns: float = 1e6, depth_gain: float = 0.7,
                 workload_scale: Mapping[str, float] | None = None):
        if family not in FAMILIES:
            raise ValueError(f"unknown landscape family {family!r}; expected one of {FAMILIES}")
        self.family = family
        self.seed = seed
        self.invalid_fraction = invalid_fraction
        self.noise_rel = noise_rel
        self.base_ns = base_ns
        self.depth_gain = depth_gain
        self.workload_scale = dict(workload_scale or {})
        self._landscapes: dict[str, Landscape] = {}
        self._lock = threading.Lock()

    def landscape(self, sketch) -> Landscape:
        with self._lock:
            ls = self._landscapes.get(sketch.id)
            if ls is None:
                u = unit_hash("sketch", self.seed, sketch.id)
                scale = self.base_ns * self.depth_gain ** len(sketch.rules) * (0.75 + 0.5 * u)
                scale *= self.workload_scale.get(sketch.workload.name, 1.0)
                sub_seed = int(unit_hash("seed", self.seed, sketch.id) * 2 ** 31)
                ls = Landscape(sketch.space, self.family, sub_seed, self.invalid_fraction,
                               self.noise_rel, scale, sketch.id)
                self._landscapes[sketch.id] = ls
            return ls

    def evaluator_for(self, sketch) -> Landscape:
        return self.landscape(sketch)

    def evaluate(self, schedule, cfg: MeasureConfig) -> Sample:
        return self.landscape(schedule.sketch).evaluate(schedule.coordinate, cfg)

    def prepare(self, schedules) -> None:
        pass
