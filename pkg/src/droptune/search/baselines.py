"""Stateless and stateful baselines: random, grid, genetic and surrogate search."""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from typing import Iterator, Sequence

from droptune import surrogate
from droptune.measure.sample import MeasureConfig
from droptune.search.tracker import SearchBudget, SearchReport, Session, Tracker, best_of
from droptune.space import Coordinate, SearchSpace

BATCH = 8


def _random_order(space: SearchSpace, rng: random.Random) -> Iterator[Coordinate]:
    """Uniform draws without replacement over the whole space."""
    size = space.size()
    seen: set[int] = set()
    while len(seen) < size:
        if 2 * len(seen) >= size:
            rest = [f for f in range(size) if f not in seen]
            rng.shuffle(rest)
            for f in rest:
                yield space.from_flat(f)
            return
        f = rng.randrange(size)
        if f in seen:
            continue
        seen.add(f)
        yield space.from_flat(f)


def _batches(it: Iterator[Coordinate], n: int) -> Iterator[list[Coordinate]]:
    batch = []
    for c in it:
        batch.append(c)
        if len(batch) == n:
            yield batch
            batch = []
    if batch:
        yield batch


def random_search(space: SearchSpace, backend, cfg: MeasureConfig, budget: SearchBudget, *,
                  session: Session | None = None, phase: str = "") -> SearchReport:
    tracker = Tracker(cfg, budget.max_trials, session, phase)
    rng = random.Random(budget.rng_seed)
    for batch in _batches(_random_order(space, rng), BATCH):
        if tracker.exhausted:
            break
        tracker.measure(backend, batch)
    return SearchReport.from_tracker(tracker, sketch_id=getattr(backend, "key", ""))


def grid_search(space: SearchSpace, backend, cfg: MeasureConfig, budget: SearchBudget, *,
                session: Session | None = None, phase: str = "") -> SearchReport:
    tracker = Tracker(cfg, budget.max_trials, session, phase)
    for batch in _batches(space.enumerate(), BATCH):
        if tracker.exhausted:
            break
        tracker.measure(backend, batch)
    return SearchReport.from_tracker(tracker, sketch_id=getattr(backend, "key", ""))


@dataclass(frozen=True)
class GAParams:
    population: int = 16
    crossover: float = 0.9
    mutation: float = 0.1
    elitism: int = 1
    tournament: int = 2
    max_stall: int = 10  # generations without a new trial before giving up


def genetic_search(space: SearchSpace, seed_population: Sequence[Sequence[int]], backend,
                   cfg: MeasureConfig, budget: SearchBudget, ga_params: GAParams = GAParams(),
                   *, session: Session | None = None, phase: str = "") -> SearchReport:
    if ga_params.population < 1:
        raise ValueError("genetic search needs a population of at least 1")
    rng = random.Random(budget.rng_seed)
    cards = space.cardinalities
    pop = [space.check(c) for c in seed_population][:ga_params.population]
    while len(pop) < ga_params.population:
        pop.append(tuple(rng.randrange(k) for k in cards))
    tracker = Tracker(cfg, budget.max_trials, session, phase)
    size = space.size()
    stall = 0
    while True:
        before = len(tracker.history)
        samples = tracker.measure(backend, pop)
        if tracker.exhausted or len(tracker.history) >= size:
            break
        stall = stall + 1 if len(tracker.history) == before else 0
        if stall >= ga_params.max_stall:
            break
        cost = [s.cost for s in samples]

        def pick() -> Coordinate:
            idx = [rng.randrange(len(pop)) for _ in range(ga_params.tournament)]
            return pop[min(idx, key=lambda i: cost[i])]

        ranked = sorted(range(len(pop)), key=lambda i: cost[i])
        nxt = [pop[i] for i in ranked[:ga_params.elitism]]
        while len(nxt) < ga_params.population:
            a, b = pick(), pick()
            if len(cards) > 1 and rng.random() < ga_params.crossover:
                cut = rng.randrange(1, len(cards))
                child = a[:cut] + b[cut:]
            else:
                child = a
            child = tuple(rng.randrange(k) if rng.random() < ga_params.mutation else g
                          for g, k in zip(child, cards))
            nxt.append(child)
        pop = nxt
    return SearchReport.from_tracker(tracker, sketch_id=getattr(backend, "key", ""))


def _unmeasured_pool(space: SearchSpace, rng: random.Random, measured, n: int
                     ) -> list[Coordinate]:
    size = space.size()
    if size - len(measured) <= 4 * n:
        rest = [c for c in space.enumerate() if c not in measured]
        return rng.sample(rest, min(n, len(rest)))
    pool, seen = [], set()
    cards = space.cardinalities
    while len(pool) < n:
        c = tuple(rng.randrange(k) for k in cards)
        if c not in measured and c not in seen:
            seen.add(c)
            pool.append(c)
    return pool


def surrogate_search(space: SearchSpace, seed: Sequence[int], backend, cfg: MeasureConfig,
                     budget: SearchBudget, *, pool_size: int = 64, batch: int = BATCH,
                     session: Session | None = None, phase: str = "") -> SearchReport:
    """Boosted-stump guided search: fit, rank a candidate pool, measure the top batch."""
    seed = space.check(seed)
    rng = random.Random(budget.rng_seed)
    tracker = Tracker(cfg, budget.max_trials, session, phase)
    measured: dict[Coordinate, object] = {}
    first = [seed] + [c for c in _unmeasured_pool(space, rng, {seed}, batch - 1)]
    for c, s in zip(first, tracker.measure(backend, first)):
        if s is not None:
            measured[c] = s
    while not tracker.exhausted and len(measured) < space.size():
        finite = [s for s in measured.values() if math.isfinite(s.cost)]
        best = best_of(list(measured.values()))
        pool = _unmeasured_pool(space, rng, measured, pool_size)
        pool += [n for n in space.neighbors(best.coordinate)
                 if n not in measured and n not in pool]
        if not pool:
            break
        k = min(batch, len(pool))
        if len(finite) >= 2:
            model = surrogate.fit_samples(space, finite)
            chosen = surrogate.rank(model, pool, space, k)
        else:
            chosen = pool[:k]
        for c, s in zip(chosen, tracker.measure(backend, chosen)):
            if s is not None:
                measured[c] = s
    return SearchReport.from_tracker(tracker, sketch_id=getattr(backend, "key", ""))
