"""Budget accounting, memoization and trial logging shared by all strategies."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

from droptune.measure.sample import MeasureConfig, Sample
from droptune.space import Coordinate


@dataclass(frozen=True)
class SearchBudget:
    max_trials: int = 100
    rng_seed: int = 0

    def __post_init__(self):
        if self.max_trials < 1:
            raise ValueError("max_trials must be >= 1")


class TrialLog:
    """Append-only JSON Lines trail of every measured sample."""

    def __init__(self, path_or_file):
        if hasattr(path_or_file, "write"):
            self._fh, self._owned = path_or_file, False
        else:
            self._fh, self._owned = open(path_or_file, "a", encoding="utf-8"), True
        self.count = 0

    def write(self, sample: Sample, layer: str = "", phase: str = "") -> None:
        rec = sample.to_record()
        rec.update(trial=self.count, layer=layer, phase=phase, sketch=sample.sketch)
        self._fh.write(json.dumps(rec) + "\n")
        self._fh.flush()
        self.count += 1

    def close(self) -> None:
        if self._owned:
            self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


class Session:
    """Samples measured for one tuning task, kept across strategy runs.

    Re-running a deterministic strategy with a larger budget replays its
    earlier trials from the memo and only measures what is new.
    """

    def __init__(self, log: TrialLog | None = None, layer: str = ""):
        self.memo: dict[tuple[str, Coordinate], Sample] = {}
        self.measured: list[Sample] = []
        self.log = log
        self.layer = layer

    @property
    def trials(self) -> int:
        return len(self.measured)


class Tracker:
    """Enforces one run's budget over the distinct coordinates it touches."""

    def __init__(self, cfg: MeasureConfig, max_trials: int, session: Session | None = None,
                 phase: str = ""):
        self.cfg = cfg
        self.max_trials = max_trials
        self.session = session if session is not None else Session()
        self.phase = phase
        self.history: list[Sample] = []
        self._touched: dict[tuple[str, Coordinate], Sample] = {}
        self.new_trials = 0

    @property
    def remaining(self) -> int:
        return self.max_trials - len(self.history)

    @property
    def exhausted(self) -> bool:
        return self.remaining <= 0

    def known(self, evaluator, c: Sequence[int]) -> Sample | None:
        return self._touched.get((evaluator.key, tuple(c)))

    def touched_count(self, evaluator) -> int:
        return sum(1 for k in self._touched if k[0] == evaluator.key)

    def measure(self, evaluator, coords: Sequence[Sequence[int]]) -> list[Sample | None]:
        """Samples for `coords`; None for those the budget no longer covers."""
        return self.measure_pairs([(evaluator, c) for c in coords])

    def measure_pairs(self, pairs) -> list[Sample | None]:
        memo = self.session.memo
        plan = []
        taken = set()
        fresh: dict[int, tuple] = {}
        budget = self.remaining
        for ev, c in pairs:
            key = (ev.key, tuple(c))
            if key in self._touched or key in taken:
                plan.append((ev, key, "known"))
            elif budget > 0:
                budget -= 1
                taken.add(key)
                plan.append((ev, key, "take"))
                if key not in memo:
                    fresh.setdefault(id(ev), (ev, []))[1].append(key[1])
            else:
                plan.append((ev, key, "skip"))
        for ev, coords in fresh.values():
            ev.prepare(coords)
        out = []
        for ev, key, action in plan:
            if action == "skip":
                out.append(None)
                continue
            if key not in self._touched:
                s = memo.get(key)
                if s is None:
                    s = ev.evaluate(key[1], self.cfg)
                    memo[key] = s
                    self.session.measured.append(s)
                    self.new_trials += 1
                    if self.session.log is not None:
                        self.session.log.write(s, self.session.layer, self.phase)
                self._touched[key] = s
                self.history.append(s)
            out.append(self._touched[key])
        return out


def best_of(samples: Sequence[Sample]) -> Sample | None:
    """Lowest-cost sample; the earliest wins ties. None for an empty list."""
    best = None
    for s in samples:
        if best is None or s.cost < best.cost:
            best = s
    return best


def merge_histories(first: Sequence[Sample], second: Sequence[Sample]) -> tuple[Sample, ...]:
    """Concatenates two phases' histories, dropping revisits of points already in the first."""
    seen = {(s.sketch, s.coordinate) for s in first}
    return tuple(first) + tuple(s for s in second if (s.sketch, s.coordinate) not in seen)


@dataclass
class SearchReport:
    best: Sample | None
    trials_used: int
    history: tuple[Sample, ...]
    converged: bool = False
    sketch_id: str = ""
    new_trials: int = 0
    path: tuple[Coordinate, ...] = ()
    sketch: object = None
    extra: dict = field(default_factory=dict)

    @property
    def best_coordinate(self) -> Coordinate | None:
        return None if self.best is None else self.best.coordinate

    @property
    def best_cost(self) -> float:
        return float("inf") if self.best is None else self.best.cost

    @classmethod
    def from_tracker(cls, tracker: Tracker, **kw) -> "SearchReport":
        hist = tuple(tracker.history)
        prior = kw.pop("prior", ())
        return cls(best_of(tuple(prior) + hist), len(hist), hist,
                   new_trials=tracker.new_trials, **kw)
