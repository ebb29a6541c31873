"""Sketch-level evolutionary exploration and the explore-then-exploit pipeline."""

from __future__ import annotations

import math
import random
import time
from dataclasses import dataclass, field

import numpy as np

from droptune import surrogate
from droptune.ir.sketch import Sketch, draw_value_index, generate_sketches
from droptune.ir.workload import Workload
from droptune.measure import bind
from droptune.measure.sample import MeasureConfig, Sample
from droptune.search.droplet import droplet_search
from droptune.search.tracker import (SearchBudget, SearchReport, Session, Tracker, best_of,
                                     merge_histories)
from droptune.space import Coordinate

MAX_STALL = 10


@dataclass
class ExploreReport:
    sketches: tuple[Sketch, ...]
    reports: tuple[SearchReport, ...]
    best_index: int | None
    trials_used: int
    history: tuple[Sample, ...]
    new_trials: int = 0

    @property
    def best_sketch(self) -> Sketch | None:
        return None if self.best_index is None else self.sketches[self.best_index]

    @property
    def best(self) -> Sample | None:
        return None if self.best_index is None else self.reports[self.best_index].best

    @property
    def best_cost(self) -> float:
        b = self.best
        return math.inf if b is None else b.cost


class _SketchState:
    def __init__(self, index: int, sketch: Sketch, evaluator):
        self.index = index
        self.sketch = sketch
        self.evaluator = evaluator
        self.samples: dict[Coordinate, Sample] = {}
        self.order: list[Sample] = []
        self._model = None
        self._fitted_at = -1

    def record(self, s: Sample) -> None:
        if s.coordinate not in self.samples:
            self.samples[s.coordinate] = s
            self.order.append(s)

    def predict(self, coords: list[Coordinate]) -> np.ndarray:
        """Predicted cost; constant with one finite sample, +inf with none."""
        finite = [s for s in self.order if math.isfinite(s.cost)]
        if not finite:
            return np.full(len(coords), math.inf)
        if len(finite) == 1:
            return np.full(len(coords), finite[0].cost)
        if self._fitted_at != len(self.order):
            self._model = surrogate.fit_samples(self.sketch.space, finite)
            self._fitted_at = len(self.order)
        return self._model.predict_cost(surrogate.feature_matrix(self.sketch.space, coords))

    def elite(self, k: int) -> list[Coordinate]:
        ranked = sorted(self.order, key=lambda s: s.cost)
        return [s.coordinate for s in ranked[:k] if math.isfinite(s.cost)]


def _mutate(st: _SketchState, c: Coordinate, rng: random.Random) -> Coordinate:
    params = st.sketch.space.params
    if not params:
        return c
    d = rng.randrange(len(params))
    return c[:d] + (draw_value_index(params[d], rng),) + c[d + 1:]


def _fresh(st: _SketchState, rng: random.Random) -> Coordinate:
    return tuple(draw_value_index(p, rng) for p in st.sketch.space.params)


def evolutionary_explore(w: Workload, backend, cfg: MeasureConfig, budget: SearchBudget, *,
                         depth: int = 3, cores: int | None = None, population: int = 16,
                         batch: int = 8, session: Session | None = None,
                         phase: str = "explore") -> ExploreReport:
    """Sample across all sketches of `w`, guided by one surrogate per sketch.

    The first batches visit the sketches in a seeded random order so every
    sketch gets one sample. Each later round mutates the elite of every
    sketch, ranks the candidates by predicted cost and measures the best
    `batch` of them.
    """
    rng = random.Random(budget.rng_seed)
    sketches = generate_sketches(w, depth, cores)
    states = [_SketchState(i, sk, bind(backend, sk)) for i, sk in enumerate(sketches)]
    tracker = Tracker(cfg, budget.max_trials, session, phase)

    def run(pairs):
        got = tracker.measure_pairs([(states[i].evaluator, c) for i, c in pairs])
        for (i, _), s in zip(pairs, got):
            if s is not None:
                states[i].record(s)

    # cold start: one seeded annotation per sketch, sketches in seeded random order
    order = list(range(len(states)))
    rng.shuffle(order)
    cold = [(i, _fresh(states[i], rng)) for i in order]
    for k in range(0, len(cold), batch):
        if tracker.exhausted:
            break
        run(cold[k:k + batch])

    stall = 0
    while not tracker.exhausted and stall < MAX_STALL:
        cands: dict[tuple[int, Coordinate], None] = {}
        for st in states:
            if st.sketch.space.size() == len(st.samples):
                continue
            parents = st.elite(population) or [_fresh(st, rng)]
            for j in range(population):
                child = _mutate(st, parents[j % len(parents)], rng)
                if child not in st.samples:
                    cands[(st.index, child)] = None
            child = _fresh(st, rng)
            if child not in st.samples:
                cands[(st.index, child)] = None
        if not cands:
            stall += 1
            continue
        stall = 0
        by_sketch: dict[int, list[Coordinate]] = {}
        for i, c in cands:
            by_sketch.setdefault(i, []).append(c)
        scored = []
        for i, coords in by_sketch.items():
            for c, p in zip(coords, states[i].predict(coords)):
                scored.append((float(p), i, c))
        scored.sort(key=lambda t: (t[0], t[1]))
        run([(i, c) for _, i, c in scored[:batch]])

    reports = tuple(
        SearchReport(best_of(st.order), len(st.order), tuple(st.order), sketch_id=st.sketch.id,
                     sketch=st.sketch)
        for st in states)
    best_index = None
    for st, rep in zip(states, reports):
        if rep.best is None or not math.isfinite(rep.best.cost):
            continue
        if best_index is None or rep.best.cost < reports[best_index].best.cost:
            best_index = st.index
    return ExploreReport(tuple(sketches), reports, best_index, len(tracker.history),
                         tuple(tracker.history), tracker.new_trials)


def combined_tune(w: Workload, backend, cfg: MeasureConfig, N: int, droplet_budget: int = 100,
                  *, rng_seed: int = 0, depth: int = 3, cores: int | None = None,
                  session: Session | None = None) -> SearchReport:
    """Explore with N trials, then run Droplet Search from the best schedule found."""
    if N < 1:
        raise ValueError("N must be >= 1")
    # one memo for both phases, so Droplet never re-measures an explored point
    session = session if session is not None else Session()
    t0 = time.perf_counter()
    ex = evolutionary_explore(w, backend, cfg, SearchBudget(N, rng_seed), depth=depth,
                              cores=cores, session=session, phase="explore")
    t1 = time.perf_counter()
    if ex.best_index is not None:
        sketch, seed, seed_sample = ex.best_sketch, ex.best.coordinate, ex.best
    else:
        # nothing valid was found: start from the naive schedule
        sketch = ex.sketches[0]
        seed, seed_sample = sketch.space.origin(), None
    dr = droplet_search(sketch.space, seed, bind(backend, sketch), cfg,
                        SearchBudget(droplet_budget, rng_seed), seed_sample=seed_sample,
                        session=session, phase="exploit")
    t2 = time.perf_counter()
    history = merge_histories(ex.history, dr.history)
    best = dr.best if dr.best is not None else ex.best
    return SearchReport(best, len(history), history,
                        converged=dr.converged, sketch_id=sketch.id,
                        new_trials=ex.new_trials + dr.new_trials, path=dr.path, sketch=sketch,
                        extra={"explore_trials": ex.trials_used,
                               "exploit_trials": dr.trials_used,
                               "explore_wall_s": t1 - t0, "exploit_wall_s": t2 - t1,
                               "explore_best_cost": ex.best_cost})
