"""Command-line entry point: tune, compare and report.

Exit codes: 0 success, 2 invalid config, 3 backend failure, 4 bad trial log.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
import time
from dataclasses import dataclass, field, fields

from droptune.ir.workload import Workload
from droptune.measure import Landscape, MeasureConfig, SyntheticBackend
from droptune.measure.native import BackendError, NativeBackend
from droptune.measure.sample import Sample
from droptune.measure.stats import wilcoxon_rank_sum
from droptune.measure.synthetic import FAMILIES
from droptune.scheduler import (STRATEGIES, AllocationPlan, LayerResult, ModelReport,
                                StrategyOptions, TuneTask, tune_model)
from droptune.search import GAParams, SearchBudget, Session, TrialLog
from droptune.search.baselines import genetic_search, grid_search, random_search, surrogate_search
from droptune.search.droplet import droplet_search
from droptune.space import SearchSpace

log = logging.getLogger("droptune")

EXIT_CONFIG, EXIT_BACKEND, EXIT_LOG = 2, 3, 4
TRIALS, REPORT, SUMMARY, CONVERGENCE, COMPARE = (
    "trials.jsonl", "report.json", "summary.csv", "convergence.csv", "compare.csv")
SPACE_STRATEGIES = ("droplet", "random", "grid", "ga", "surrogate")
SUMMARY_FIELDS = ["layer", "trials", "ok", "invalid", "timeout", "best_cost_ns", "best_sketch",
                  "best_coord"]


class ConfigError(ValueError):
    def __init__(self, field_name: str, msg: str):
        super().__init__(f"config field {field_name!r}: {msg}")
        self.field = field_name


class LogError(ValueError):
    pass


# -- config ------------------------------------------------------------------

@dataclass
class ExperimentConfig:
    raw: dict
    tasks: list[TuneTask] = field(default_factory=list)
    space: SearchSpace | None = None
    backend: dict = field(default_factory=dict)
    strategy: str = "combined"
    K: int = 100
    N: int | None = None
    droplet_budget: int = 100
    measure: MeasureConfig = MeasureConfig()
    options: StrategyOptions = StrategyOptions()
    rng_seed: int = 0
    output_dir: str = "out"
    base_dir: str = "."


def _nat(doc: dict, key: str, where: str, default=None, minimum: int = 0):
    v = doc.get(key, default)
    if v is None:
        return None
    if isinstance(v, bool) or not isinstance(v, int) or v < minimum:
        raise ConfigError(f"{where}{key}", f"expected an integer >= {minimum}, got {v!r}")
    return v


def parse_config(doc: dict, base_dir: str = ".") -> ExperimentConfig:
    if not isinstance(doc, dict):
        raise ConfigError("<root>", "expected a JSON object")
    cfg = ExperimentConfig(raw=doc, base_dir=base_dir)

    if "workloads" in doc and "space" in doc:
        raise ConfigError("space", "give either 'workloads' or 'space', not both")
    if "workloads" in doc:
        items = doc["workloads"]
        if not isinstance(items, list) or not items:
            raise ConfigError("workloads", "expected a non-empty list")
        seen = set()
        for k, item in enumerate(items):
            where = f"workloads[{k}]"
            if not isinstance(item, dict):
                raise ConfigError(where, "expected an object")
            try:
                w = Workload.from_json(item)
            except (ValueError, KeyError, TypeError) as exc:
                raise ConfigError(where, str(exc)) from None
            layer = str(item.get("layer", w.name))
            if layer in seen:
                raise ConfigError(f"{where}.layer", f"duplicate layer id {layer!r}")
            seen.add(layer)
            weight = item.get("weight", 1)
            if not isinstance(weight, (int, float)) or weight < 1:
                raise ConfigError(f"{where}.weight", f"expected a number >= 1, got {weight!r}")
            cfg.tasks.append(TuneTask(layer, w, float(weight)))
    elif "space" in doc:
        try:
            cfg.space = SearchSpace.from_json(doc["space"])
        except (ValueError, KeyError, TypeError) as exc:
            raise ConfigError("space", str(exc)) from None
    else:
        raise ConfigError("workloads", "missing; give 'workloads' or 'space'")

    backend = doc.get("backend", {"kind": "synthetic"})
    if not isinstance(backend, dict):
        raise ConfigError("backend", "expected an object")
    kind = backend.get("kind", "synthetic")
    if kind not in ("synthetic", "native"):
        raise ConfigError("backend.kind", f"expected 'synthetic' or 'native', got {kind!r}")
    if kind == "synthetic":
        fam = backend.get("family", "rugged")
        if fam not in FAMILIES:
            raise ConfigError("backend.family", f"expected one of {list(FAMILIES)}, got {fam!r}")
        for key in ("invalid_fraction", "noise_rel"):
            v = backend.get(key, 0.0)
            if not isinstance(v, (int, float)) or v < 0 or (key == "invalid_fraction" and v >= 1):
                raise ConfigError(f"backend.{key}", f"out of range: {v!r}")
        _nat(backend, "seed", "backend.", 0)
    else:
        if cfg.space is not None:
            raise ConfigError("backend.kind", "the native backend needs 'workloads'")
        if backend.get("dtype", "float64") not in ("float64", "int64"):
            raise ConfigError("backend.dtype", "expected 'float64' or 'int64'")
        cache = backend.get("cache_dir")
        if cache is not None:
            backend = dict(backend, cache_dir=os.path.join(base_dir, cache))
    cfg.backend = backend

    strategy = doc.get("strategy", "combined")
    if strategy not in STRATEGIES:
        raise ConfigError("strategy", f"unknown strategy {strategy!r}; expected one of "
                                      f"{list(STRATEGIES)}")
    if cfg.space is not None and strategy not in SPACE_STRATEGIES:
        raise ConfigError("strategy", f"{strategy!r} needs 'workloads', not a raw 'space'")
    cfg.strategy = strategy

    budgets = doc.get("budgets", {})
    if not isinstance(budgets, dict):
        raise ConfigError("budgets", "expected an object")
    cfg.K = _nat(budgets, "K", "budgets.", 100, 1)
    cfg.N = _nat(budgets, "N", "budgets.", None, 1)
    cfg.droplet_budget = _nat(budgets, "droplet_budget", "budgets.", 100, 1)
    if strategy == "combined":
        if cfg.N is None:
            raise ConfigError("budgets.N", "required by the combined strategy")
        if cfg.N >= cfg.K:
            raise ConfigError("budgets.N", f"must be smaller than K ({cfg.N} >= {cfg.K})")

    m = doc.get("measure", {})
    if not isinstance(m, dict):
        raise ConfigError("measure", "expected an object")
    known = {f.name for f in fields(MeasureConfig)}
    for key in m:
        if key not in known:
            raise ConfigError(f"measure.{key}", f"unknown field; expected one of {sorted(known)}")
    try:
        cfg.measure = MeasureConfig(**m)
    except (ValueError, TypeError) as exc:
        raise ConfigError("measure", str(exc)) from None

    s = doc.get("search", {})
    if not isinstance(s, dict):
        raise ConfigError("search", "expected an object")
    try:
        ga = GAParams(**s.get("ga", {}))
    except TypeError as exc:
        raise ConfigError("search.ga", str(exc)) from None
    if ga.population < 1:
        raise ConfigError("search.ga.population", "must be >= 1")
    cores = doc.get("cores", s.get("cores"))
    if cores is not None and (not isinstance(cores, int) or cores < 1):
        raise ConfigError("cores", f"expected an integer >= 1, got {cores!r}")
    cfg.options = StrategyOptions(depth=_nat(s, "depth", "search.", 3),
                                  cores=cores, ga=ga,
                                  pool=_nat(s, "pool", "search.", 64, 1),
                                  batch=_nat(s, "batch", "search.", 8, 1))
    cfg.rng_seed = _nat(doc, "rng_seed", "", 0)
    out = doc.get("output_dir", "out")
    if not isinstance(out, str) or not out:
        raise ConfigError("output_dir", "expected a non-empty path")
    cfg.output_dir = os.path.join(base_dir, out)
    return cfg


def load_config(path: str) -> ExperimentConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except FileNotFoundError:
        raise ConfigError("<file>", f"config file {path!r} does not exist") from None
    except json.JSONDecodeError as exc:
        raise ConfigError("<file>", f"{path}: invalid JSON: {exc}") from None
    return parse_config(doc, os.path.dirname(os.path.abspath(path)))


# -- running -----------------------------------------------------------------

def make_backend(cfg: ExperimentConfig):
    b = cfg.backend
    if b.get("kind", "synthetic") == "native":
        return NativeBackend(dtype=b.get("dtype", "float64"), cc=b.get("cc"),
                             cache_dir=b.get("cache_dir"), seed=b.get("seed", 0))
    family = b.get("family", "rugged")
    seed = b.get("seed", 0)
    inv, noise = b.get("invalid_fraction", 0.0), b.get("noise_rel", 0.0)
    if cfg.space is not None:
        return Landscape(cfg.space, family, seed, inv, noise, key="space")
    return SyntheticBackend(family, seed, inv, noise)


def _space_search(cfg: ExperimentConfig, backend, session: Session):
    budget = SearchBudget(cfg.K, cfg.rng_seed)
    space, origin, m, o = cfg.space, cfg.space.origin(), cfg.measure, cfg.options
    st = cfg.strategy
    if st == "droplet":
        return droplet_search(space, origin, backend, m, budget, session=session)
    if st == "random":
        return random_search(space, backend, m, budget, session=session, phase="search")
    if st == "grid":
        return grid_search(space, backend, m, budget, session=session, phase="search")
    if st == "ga":
        return genetic_search(space, [origin], backend, m, budget, o.ga, session=session,
                              phase="search")
    return surrogate_search(space, origin, backend, m, budget, pool_size=o.pool,
                            batch=o.batch, session=session, phase="search")


def run_experiment(cfg: ExperimentConfig, out_dir: str) -> dict:
    """Run one strategy, writing trials.jsonl, report.json and summary.csv to out_dir."""
    os.makedirs(out_dir, exist_ok=True)
    trials_path = os.path.join(out_dir, TRIALS)
    backend = make_backend(cfg)
    t0 = time.perf_counter()
    with open(trials_path, "w", encoding="utf-8") as fh:
        tlog = TrialLog(fh)
        if cfg.space is not None:
            session = Session(tlog, "space")
            rep = _space_search(cfg, backend, session)
            task = TuneTask("space", Workload.reduce(1, name="space"))
            model = ModelReport(cfg.strategy, cfg.K,
                                [LayerResult(task, rep, rep.trials_used)],
                                AllocationPlan(cfg.K, [("space", rep.trials_used)]),
                                {"search": time.perf_counter() - t0})
            layer_timings = [(1.0, rep.best)]
        else:
            model = tune_model(cfg.tasks, cfg.K, cfg.strategy, backend, cfg.measure,
                               rng_seed=cfg.rng_seed, log_file=tlog, opts=cfg.options,
                               N=cfg.N, droplet_budget=cfg.droplet_budget)
            layer_timings = [(lr.task.weight, None if lr.report is None else lr.report.best)
                             for lr in model.layers]
    wall = time.perf_counter() - t0
    doc = {"config": cfg.raw, "model": model.to_json(), "wall_s": dict(model.wall_s, total=wall)}
    if cfg.space is not None:
        doc["model"]["layers"][0].pop("workload", None)
        doc["model"]["layers"][0]["best_values"] = (
            None if model.layers[0].report.best is None
            else dict(cfg.space.values_of(model.layers[0].report.best.coordinate)))
    with open(os.path.join(out_dir, REPORT), "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, default=_json_default)
        fh.write("\n")
    write_summary(out_dir)
    return {"model": model, "wall_s": wall, "timings": _model_timings(layer_timings),
            "best_cost": model.weighted_total}


def _json_default(o):
    if isinstance(o, float) and not math.isfinite(o):
        return None
    raise TypeError(f"cannot serialize {type(o).__name__}")


def _model_timings(layer_timings) -> list[float] | None:
    """Per-repeat weighted model time from each layer's best sample."""
    if not layer_timings or any(s is None or not s.ok for _, s in layer_timings):
        return None
    n = min(len(s.timings) for _, s in layer_timings)
    return [sum(w * s.timings[r] for w, s in layer_timings) for r in range(n)]


# -- log reading -------------------------------------------------------------

def read_trials(path: str) -> list[dict]:
    """Parse trials.jsonl; LogError names the first bad line."""
    if not os.path.exists(path):
        raise LogError(f"{path}: trial log does not exist")
    recs = []
    with open(path, encoding="utf-8") as fh:
        for no, line in enumerate(fh, 1):
            if not line.endswith("\n"):
                raise LogError(f"{path}:{no}: truncated record (no trailing newline)")
            try:
                rec = json.loads(line)
                Sample.from_record(rec)
                for key in ("trial", "layer", "phase", "sketch"):
                    rec[key]
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise LogError(f"{path}:{no}: bad record: {exc}") from None
            recs.append(rec)
    if not recs:
        raise LogError(f"{path}: trial log is empty")
    return recs


def _fmt(v: float) -> str:
    return repr(float(v))


def summary_rows(recs: list[dict]) -> list[dict]:
    rows: dict[str, dict] = {}
    for rec in recs:
        r = rows.setdefault(rec["layer"], {"layer": rec["layer"], "trials": 0, "ok": 0,
                                           "invalid": 0, "timeout": 0, "best_cost_ns": "",
                                           "best_sketch": "", "best_coord": ""})
        r["trials"] += 1
        r[rec["status"]] = r.get(rec["status"], 0) + 1
        c = rec["cost_ns"]
        if c is not None and (r["best_cost_ns"] == "" or c < float(r["best_cost_ns"])):
            r["best_cost_ns"] = _fmt(c)
            r["best_sketch"] = rec["sketch"]
            r["best_coord"] = " ".join(map(str, rec["coord"]))
    return list(rows.values())


def convergence_rows(recs: list[dict]) -> list[dict]:
    rows, layer_best = [], {}
    for k, rec in enumerate(recs):
        c = rec["cost_ns"]
        cur = layer_best.get(rec["layer"], math.inf)
        if c is not None and c < cur:
            layer_best[rec["layer"]] = cur = c
        rows.append({"index": k, "layer": rec["layer"], "phase": rec["phase"],
                     "cost_ns": "" if c is None else _fmt(c),
                     "layer_best_ns": "" if math.isinf(cur) else _fmt(cur)})
    return rows


def _write_csv(path: str, fieldnames, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        wr = csv.DictWriter(fh, fieldnames=fieldnames, extrasaction="ignore")
        wr.writeheader()
        wr.writerows(rows)


def write_summary(out_dir: str) -> list[dict]:
    recs = read_trials(os.path.join(out_dir, TRIALS))
    rows = summary_rows(recs)
    _write_csv(os.path.join(out_dir, SUMMARY), SUMMARY_FIELDS, rows)
    return recs


# -- commands ----------------------------------------------------------------

def cmd_tune(args) -> int:
    cfg = load_config(args.config)
    out = args.output or cfg.output_dir
    res = run_experiment(cfg, out)
    m = res["model"]
    print(f"{cfg.strategy}: {m.total_trials} trials, weighted best {m.weighted_total:.6g} ns, "
          f"{res['wall_s']:.2f} s -> {out}")
    return 0


def cmd_compare(args) -> int:
    cfg = load_config(args.config)
    names = [s.strip() for s in args.strategies.split(",") if s.strip()]
    if not names:
        raise ConfigError("strategies", "no strategy given")
    for s in names:
        if s not in STRATEGIES:
            raise ConfigError("strategies", f"unknown strategy {s!r}; expected one of "
                                            f"{list(STRATEGIES)}")
    runs = []
    for s in names:
        doc = dict(cfg.raw, strategy=s)
        sub = parse_config(doc, cfg.base_dir)
        res = run_experiment(sub, os.path.join(args.output or cfg.output_dir, s))
        runs.append((s, res))
    best_k = min(range(len(runs)), key=lambda k: (runs[k][1]["best_cost"], k))
    ref = runs[best_k][1]["timings"]
    rows = []
    for k, (s, res) in enumerate(runs):
        p, sig = "", "n/a"
        t = res["timings"]
        if k == best_k:
            p, sig = 1.0, "best"
        elif t is not None and ref is not None and len(t) >= 3 and len(ref) >= 3:
            p = wilcoxon_rank_sum(t, ref)
            sig = "worse" if p < cfg.measure.alpha_report else "tie"
        bc = res["best_cost"]
        rows.append({"strategy": s, "best_cost_ns": _fmt(bc) if math.isfinite(bc) else "",
                     "trials": res["model"].total_trials, "wall_s": f"{res['wall_s']:.4f}",
                     "p_value": p if p == "" else _fmt(p), "significance": sig})
    out = args.output or cfg.output_dir
    _write_csv(os.path.join(out, COMPARE), ["strategy", "best_cost_ns", "trials", "wall_s",
                                            "p_value", "significance"], rows)
    for r in rows:
        print(f"{r['strategy']:>10}  {r['best_cost_ns']:>22}  {r['trials']:>6}  "
              f"{r['significance']}")
    return 0


def cmd_report(args) -> int:
    recs = write_summary(args.dir)
    _write_csv(os.path.join(args.dir, CONVERGENCE),
               ["index", "layer", "phase", "cost_ns", "layer_best_ns"], convergence_rows(recs))
    print(f"{len(recs)} trials -> {os.path.join(args.dir, SUMMARY)}, "
          f"{os.path.join(args.dir, CONVERGENCE)}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="droptune", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    p = sub.add_parser("tune", help="run one tuning experiment")
    p.add_argument("config")
    p.add_argument("-o", "--output", help="override output_dir")
    p.set_defaults(func=cmd_tune)
    p = sub.add_parser("compare", help="run several strategies on identical budgets")
    p.add_argument("config")
    p.add_argument("--strategies", required=True, help="comma-separated strategy names")
    p.add_argument("-o", "--output", help="override output_dir")
    p.set_defaults(func=cmd_compare)
    p = sub.add_parser("report", help="rebuild summary and convergence CSVs from trials.jsonl")
    p.add_argument("dir")
    p.set_defaults(func=cmd_report)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BackendError as exc:
        print(f"backend error: {exc}", file=sys.stderr)
        return EXIT_BACKEND
    except LogError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_LOG


if __name__ == "__main__":
    sys.exit(main())
