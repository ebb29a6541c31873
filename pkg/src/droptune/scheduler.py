"""Share one trial budget across the layers of a model.

Every layer first gets the same initial quota. The rest goes out in fixed
increments to whichever remaining layer contributes most to the model's
weighted cost.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field

from droptune.ir.sketch import Sketch, generate_sketches
from droptune.ir.workload import Workload
from droptune.measure import bind
from droptune.measure.sample import MeasureConfig
from droptune.search import (GAParams, SearchBudget, SearchReport, Session, TrialLog,
                             combined_tune, droplet_search, evolutionary_explore,
                             genetic_search, grid_search, random_search, surrogate_search)
from droptune.search.tracker import best_of, merge_histories

log = logging.getLogger(__name__)

STRATEGIES = ("droplet", "random", "grid", "ga", "surrogate", "explore", "combined")
MAX_INITIAL_QUOTA = 64
INCREMENT = 16
DROP_FRACTION = 0.01


@dataclass(frozen=True)
class TuneTask:
    layer_id: str
    workload: Workload
    weight: float = 1.0

    def __post_init__(self):
        if self.weight < 1:
            raise ValueError(f"layer {self.layer_id!r}: weight must be >= 1, got {self.weight}")


@dataclass(frozen=True)
class StrategyOptions:
    depth: int = 3
    cores: int | None = None
    ga: GAParams = GAParams()
    pool: int = 64
    batch: int = 8


def initial_quota(K: int, L: int) -> int:
    """Trials every layer gets before refocusing: min(K // L, 64), at least 1."""
    if K < 1 or L < 1:
        raise ValueError("K and L must be >= 1")
    return max(1, min(K // L, MAX_INITIAL_QUOTA))


def template_sketch(w: Workload, opts: StrategyOptions) -> Sketch:
    """The single space searched by the one-sketch strategies: the most transformed one."""
    return generate_sketches(w, opts.depth, opts.cores)[-1]


def run_strategy(strategy: str, w: Workload, backend, cfg: MeasureConfig, budget: SearchBudget,
                 session: Session | None = None, opts: StrategyOptions = StrategyOptions()
                 ) -> SearchReport:
    """One run of a non-combined strategy on workload `w`."""
    if strategy == "explore":
        ex = evolutionary_explore(w, backend, cfg, budget, depth=opts.depth, cores=opts.cores,
                                  batch=opts.batch, session=session, phase="explore")
        best = ex.best if ex.best is not None else best_of(ex.history)
        return SearchReport(best, ex.trials_used, ex.history,
                            sketch_id="" if ex.best_sketch is None else ex.best_sketch.id,
                            new_trials=ex.new_trials, sketch=ex.best_sketch)
    sk = template_sketch(w, opts)
    ev = bind(backend, sk)
    space, origin = sk.space, sk.space.origin()
    if strategy == "droplet":
        rep = droplet_search(space, origin, ev, cfg, budget, session=session, phase="exploit")
    elif strategy == "random":
        rep = random_search(space, ev, cfg, budget, session=session, phase="search")
    elif strategy == "grid":
        rep = grid_search(space, ev, cfg, budget, session=session, phase="search")
    elif strategy == "ga":
        rep = genetic_search(space, [origin], ev, cfg, budget, opts.ga, session=session,
                             phase="search")
    elif strategy == "surrogate":
        rep = surrogate_search(space, origin, ev, cfg, budget, pool_size=opts.pool,
                               batch=opts.batch, session=session, phase="search")
    else:
        raise ValueError(f"unknown strategy {strategy!r}; expected one of {STRATEGIES}")
    rep.sketch = sk
    rep.sketch_id = sk.id
    return rep


@dataclass
class AllocationPlan:
    quota: int
    rounds: list[tuple[str, int]] = field(default_factory=list)

    @property
    def total(self) -> int:
        return sum(t for _, t in self.rounds)


@dataclass
class LayerResult:
    task: TuneTask
    report: SearchReport | None = None
    trials: int = 0
    phase2_trials: int = 0
    dropped: bool = False

    @property
    def best_cost(self) -> float:
        return math.inf if self.report is None else self.report.best_cost

    @property
    def weighted_cost(self) -> float:
        return self.task.weight * self.best_cost


@dataclass
class ModelReport:
    strategy: str
    K: int
    layers: list[LayerResult]
    plan: AllocationPlan
    wall_s: dict[str, float] = field(default_factory=dict)

    @property
    def total_trials(self) -> int:
        return sum(lr.trials for lr in self.layers)

    @property
    def weighted_total(self) -> float:
        return sum(lr.weighted_cost for lr in self.layers)

    def csv_rows(self) -> list[dict]:
        rows = []
        for lr in self.layers:
            rep = lr.report
            rows.append({
                "layer": lr.task.layer_id, "weight": lr.task.weight, "trials": lr.trials,
                "best_cost_ns": lr.best_cost if math.isfinite(lr.best_cost) else "",
                "sketch": "" if rep is None else rep.sketch_id,
                "coordinate": "" if rep is None or rep.best is None
                else " ".join(map(str, rep.best.coordinate)),
            })
        return rows

    def to_json(self) -> dict:
        layers = []
        for lr in self.layers:
            rep = lr.report
            best = None if rep is None else rep.best
            sched = None
            if best is not None and rep.sketch is not None and best.ok:
                sched = dict(rep.sketch.space.values_of(best.coordinate))
            layers.append({
                "layer": lr.task.layer_id, "workload": lr.task.workload.to_json(),
                "weight": lr.task.weight, "trials": lr.trials,
                "phase2_trials": lr.phase2_trials, "dropped": lr.dropped,
                "sketch": "" if rep is None else rep.sketch_id,
                "best_coordinate": None if best is None else list(best.coordinate),
                "best_values": sched,
                "best_cost_ns": best.cost if best is not None and best.ok else None,
                "converged": False if rep is None else rep.converged,
            })
        wt = self.weighted_total
        return {"strategy": self.strategy, "K": self.K, "total_trials": self.total_trials,
                "weighted_total_cost_ns": wt if math.isfinite(wt) else None,
                "initial_quota": self.plan.quota, "rounds": [list(r) for r in self.plan.rounds],
                "wall_s": self.wall_s, "layers": layers}


def _allocate(tasks, K, run_layer, increment, drop_fraction) -> tuple[list[LayerResult],
                                                                       AllocationPlan]:
    """Round-robin quota, then refocus. `run_layer(i, budget)` re-runs layer i
    with a cumulative budget and returns its SearchReport."""
    layers = [LayerResult(t) for t in tasks]
    plan = AllocationPlan(initial_quota(K, len(tasks)))
    used = 0

    def grant(i: int, n: int) -> int:
        lr = layers[i]
        rep = run_layer(i, lr.trials + n)
        gained = rep.trials_used - lr.trials
        lr.report, lr.trials = rep, rep.trials_used
        plan.rounds.append((lr.task.layer_id, gained))
        return gained

    for i in range(len(layers)):
        n = min(plan.quota, K - used)
        if n <= 0:
            break
        used += grant(i, n)

    active = [i for i, lr in enumerate(layers) if lr.report is not None]
    while used < K and active:
        finite = [layers[i].weighted_cost for i in range(len(layers))
                  if math.isfinite(layers[i].weighted_cost)]
        total = sum(finite)
        for i in list(active):
            wc = layers[i].weighted_cost
            if math.isfinite(wc) and total > 0 and wc < drop_fraction * total:
                layers[i].dropped = True
                active.remove(i)
        if not active:
            break
        # ties go to the layer that has had fewer trials, then the earlier one
        i = max(active, key=lambda j: (layers[j].weighted_cost, -layers[j].trials, -j))
        gained = grant(i, min(increment, K - used))
        layers[i].phase2_trials += gained
        used += gained
        if gained == 0:
            # converged or space exhausted: more budget cannot help this layer
            layers[i].dropped = True
            active.remove(i)
    return layers, plan


def tune_model(tasks: list[TuneTask], K: int, strategy: str, backend, cfg: MeasureConfig, *,
               rng_seed: int = 0, log_file: TrialLog | None = None,
               opts: StrategyOptions = StrategyOptions(), N: int | None = None,
               droplet_budget: int = 100, increment: int = INCREMENT,
               drop_fraction: float = DROP_FRACTION) -> ModelReport:
    """Tune every layer under one global budget of K trials.

    For `combined`, the allocation policy distributes the N exploration
    trials, then every layer runs Droplet Search from its best schedule,
    limited by what is left of K.
    """
    if not tasks:
        raise ValueError("tasks must not be empty")
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown strategy {strategy!r}; expected one of {STRATEGIES}")
    if K < 1:
        raise ValueError("K must be >= 1")
    sessions = [Session(log_file, t.layer_id) for t in tasks]
    inner = "explore" if strategy == "combined" else strategy
    phase_budget = K
    if strategy == "combined":
        if N is None or not 1 <= N < K:
            raise ValueError("combined needs 1 <= N < K")
        phase_budget = N

    def run_layer(i: int, budget: int) -> SearchReport:
        return run_strategy(inner, tasks[i].workload, backend, cfg,
                            SearchBudget(budget, rng_seed), sessions[i], opts)

    t0 = time.perf_counter()
    layers, plan = _allocate(tasks, phase_budget, run_layer, increment, drop_fraction)
    t1 = time.perf_counter()
    wall = {"explore" if strategy in ("explore", "combined") else "search": t1 - t0}
    if strategy == "combined":
        used = sum(lr.trials for lr in layers)
        for lr, sess in zip(layers, sessions):
            left = min(droplet_budget, K - used)
            if left <= 0:
                break
            lr.report = _exploit(lr, backend, cfg, left, rng_seed, sess, opts)
            gained = lr.report.trials_used - lr.trials
            lr.trials = lr.report.trials_used
            used += gained
            plan.rounds.append((lr.task.layer_id, gained))
        wall["exploit"] = time.perf_counter() - t1
    rep = ModelReport(strategy, K, layers, plan, wall)
    log.info("tuned %d layers with %s: %d trials, weighted cost %.4g ns",
             len(tasks), strategy, rep.total_trials, rep.weighted_total)
    return rep


def _exploit(lr: LayerResult, backend, cfg, budget, rng_seed, session, opts) -> SearchReport:
    """Droplet Search from a layer's explored best; merges both phases."""
    prev = lr.report
    if prev is not None and prev.best is not None and prev.best.ok and prev.sketch is not None:
        sk, seed, seed_sample = prev.sketch, prev.best.coordinate, prev.best
    else:
        sk = generate_sketches(lr.task.workload, 0)[0]
        seed, seed_sample = sk.space.origin(), None
    dr = droplet_search(sk.space, seed, bind(backend, sk), cfg, SearchBudget(budget, rng_seed),
                        seed_sample=seed_sample, session=session, phase="exploit")
    history = merge_histories(prev.history if prev is not None else (), dr.history)
    best = dr.best if dr.best is not None else (prev.best if prev is not None else None)
    return SearchReport(best, len(history), history, converged=dr.converged, sketch_id=sk.id,
                        new_trials=dr.new_trials, path=dr.path, sketch=sk,
                        extra={"exploit_trials": dr.trials_used})


def tune_workload(w: Workload, K: int, strategy: str, backend, cfg: MeasureConfig, *,
                  rng_seed: int = 0, session: Session | None = None,
                  opts: StrategyOptions = StrategyOptions(), N: int | None = None,
                  droplet_budget: int = 100) -> SearchReport:
    """Single-kernel run of any strategy with a total budget of K trials."""
    if strategy == "combined":
        if N is None or not 1 <= N < K:
            raise ValueError("combined needs 1 <= N < K")
        return combined_tune(w, backend, cfg, N, min(droplet_budget, K - N), rng_seed=rng_seed,
                             depth=opts.depth, cores=opts.cores, session=session)
    return run_strategy(strategy, w, backend, cfg, SearchBudget(K, rng_seed), session, opts)
