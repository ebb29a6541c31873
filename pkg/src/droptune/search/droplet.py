"""Coordinate descent over an annotation space with a rank-test stopping rule."""

from __future__ import annotations

from typing import Sequence

from droptune.measure.sample import MeasureConfig, Sample
from droptune.measure.stats import FIRST_BETTER, compare
from droptune.search.tracker import SearchBudget, SearchReport, Session, Tracker
from droptune.space import SearchSpace

DEFAULT_BUDGET = SearchBudget(100)


def droplet_search(space: SearchSpace, seed: Sequence[int], backend, cfg: MeasureConfig,
                   budget: SearchBudget = DEFAULT_BUDGET, *, seed_sample: Sample | None = None,
                   session: Session | None = None, phase: str = "exploit") -> SearchReport:
    """Move to statistically faster neighbors until none exists.

    A full ring measures every unvisited neighbor of the incumbent and
    compares each against it at `cfg.alpha_converge`. Among the significantly
    faster ones the lowest median wins, earlier neighbor order breaking ties.
    After a move the search keeps stepping in the same direction while that
    single probe is significantly faster, and only then sweeps a new ring.
    `seed_sample`, when given, is reused instead of measuring the seed and is
    not charged to the budget.
    """
    current = space.check(seed)
    tracker = Tracker(cfg, budget.max_trials, session, phase)
    if seed_sample is not None:
        samples = {current: seed_sample}
    else:
        samples = {current: tracker.measure(backend, [current])[0]}
    path = [current]
    converged = False

    def better(c) -> bool:
        return compare(samples[c], samples[current], cfg.alpha_converge) == FIRST_BETTER

    while True:
        nbrs = space.neighbors(current)
        new = [n for n in nbrs if n not in samples]
        got = tracker.measure(backend, new)
        for n, s in zip(new, got):
            if s is not None:
                samples[n] = s
        if any(s is None for s in got):
            break
        faster = [n for n in nbrs if better(n)]
        if not faster:
            converged = True
            break
        step = min(faster, key=lambda n: samples[n].cost)
        while True:
            delta = tuple(b - a for a, b in zip(current, step))
            current = step
            path.append(current)
            step = tuple(a + d for a, d in zip(current, delta))
            if not space.contains(step):
                break
            if step not in samples:
                s = tracker.measure(backend, [step])[0]
                if s is None:
                    break
                samples[step] = s
            if not better(step):
                break
    prior = (seed_sample,) if seed_sample is not None else ()
    return SearchReport.from_tracker(tracker, converged=converged,
                                     sketch_id=getattr(backend, "key", ""),
                                     path=tuple(path), prior=prior)
