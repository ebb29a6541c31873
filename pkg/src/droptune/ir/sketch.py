"""Sketches, sketch-generation rules, annotation initialization and `apply`.

A sketch is a workload plus an ordered list of transformations whose
numeric parameters are left open. Binding those parameters to a coordinate
of the sketch's SearchSpace resolves a concrete loop nest (a Schedule).
"""

from __future__ import annotations

import math
import os
import random
from dataclasses import dataclass, field
from typing import Mapping, Sequence, Union

from droptune.ir import expr as E
from droptune.ir.workload import Stage, Workload
from droptune.space import Coordinate, ParamDef, SearchSpace

UNROLL_VALUES = (0, 16, 64, 512)
UNROLL_WEIGHTS = {0: 0.4, 16: 0.2, 64: 0.2, 512: 0.2}
VECTOR_WIDTHS = (1, 4, 8, 16)

# Canonical application order; a sketch applies its rules in this order.
RULES = ("inline", "tile", "vectorize", "parallel", "unroll")


# -- transformations ---------------------------------------------------------

@dataclass(frozen=True)
class Tile:
    loop: str
    slot: str


@dataclass(frozen=True)
class Unroll:
    loop: str
    slot: str


@dataclass(frozen=True)
class Parallelize:
    loop: str
    slot: str


@dataclass(frozen=True)
class Inline:
    producer: str


@dataclass(frozen=True)
class Fuse:
    outer: str
    inner: str


@dataclass(frozen=True)
class Vectorize:
    loop: str
    slot: str


Transformation = Union[Tile, Unroll, Parallelize, Inline, Fuse, Vectorize]


# -- resolved loop nests -----------------------------------------------------

@dataclass(frozen=True)
class Loop:
    name: str
    extent: E.Expr
    nominal: int  # upper bound of `extent` over all outer iterations
    kind: str = "serial"  # serial | parallel | unroll | vectorize
    factor: int = 1
    reduction: bool = False


@dataclass(frozen=True)
class StageNest:
    stage: Stage
    loops: tuple[Loop, ...]
    index: tuple[tuple[str, E.Expr], ...]  # original axis -> expression over loop vars

    @property
    def bindings(self) -> dict[str, E.Expr]:
        return dict(self.index)


class _NestBuilder:
    def __init__(self, stage: Stage):
        self.stage = stage
        self.loops = [Loop(a.name, E.Const(a.extent), a.extent, reduction=a.reduction)
                      for a in stage.axes]
        self.index = {a.name: E.Var(a.name) for a in stage.axes}

    def has(self, name: str) -> bool:
        return any(lp.name == name for lp in self.loops)

    def pos(self, name: str) -> int:
        for i, lp in enumerate(self.loops):
            if lp.name == name:
                return i
        raise KeyError(f"no loop {name!r} in stage {self.stage.name}")

    def _subst(self, mapping, start: int):
        self.index = {k: E.substitute(v, mapping) for k, v in self.index.items()}
        for i in range(start, len(self.loops)):
            lp = self.loops[i]
            self.loops[i] = _replace(lp, extent=E.substitute(lp.extent, mapping))

    def split(self, name: str, factor: int):
        """Tile: outer keeps its place, the inner part moves innermost."""
        i = self.pos(name)
        lp = self.loops[i]
        if not isinstance(lp.extent, E.Const):
            raise ValueError(f"cannot tile loop {name!r} with a variable extent")
        ext = lp.extent.value
        n_outer = -(-ext // factor)
        outer = Loop(name + ".o", E.Const(n_outer), n_outer, reduction=lp.reduction)
        ov = E.Var(outer.name)
        if ext % factor == 0:
            inner_ext = E.Const(factor)
        else:
            inner_ext = E.minimum(factor, E.sub(ext, E.mul(ov, factor)))
        inner = Loop(name + ".i", inner_ext, min(factor, ext), reduction=lp.reduction)
        self.loops[i] = outer
        self.loops.append(inner)
        self._subst({name: E.add(E.mul(ov, factor), E.Var(inner.name))}, i + 1)

    def vectorize(self, name: str, width: int):
        i = self.pos(name)
        if i != len(self.loops) - 1:
            raise ValueError(f"only the innermost loop can be vectorized, not {name!r}")
        lp = self.loops[i]
        x = lp.extent
        if isinstance(x, E.Const):
            chunks = E.Const(-(-x.value // width))
        else:
            chunks = E.floordiv(E.add(x, width - 1), width)
        vo = Loop(name + ".vo", chunks, -(-lp.nominal // width))
        if isinstance(x, E.Const) and x.value % width == 0:
            lane_ext = E.Const(width)
        else:
            lane_ext = E.minimum(width, E.sub(x, E.mul(E.Var(vo.name), width)))
        lane = Loop(name + ".v", lane_ext, min(width, lp.nominal), kind="vectorize",
                    factor=width)
        self.loops[i:i + 1] = [vo, lane]
        self._subst({name: E.add(E.mul(E.Var(vo.name), width), E.Var(lane.name))}, i)

    def fuse(self, a: str, b: str):
        i = self.pos(a)
        if self.pos(b) != i + 1:
            raise ValueError(f"loops {a!r} and {b!r} are not adjacent")
        la, lb = self.loops[i], self.loops[i + 1]
        if not (isinstance(la.extent, E.Const) and isinstance(lb.extent, E.Const)):
            raise ValueError("fused loops need constant extents")
        nb = lb.extent.value
        total = la.extent.value * nb
        fused = Loop(f"{a}.{b}.fused", E.Const(total), total)
        fv = E.Var(fused.name)
        self.loops[i:i + 2] = [fused]
        self._subst({a: E.floordiv(fv, nb), b: E.mod(fv, nb)}, i + 1)

    def mark(self, name: str, kind: str, factor: int):
        i = self.pos(name)
        self.loops[i] = _replace(self.loops[i], kind=kind, factor=factor)

    def freeze(self) -> StageNest:
        order = [a.name for a in self.stage.axes]
        return StageNest(self.stage, tuple(self.loops),
                         tuple((k, self.index[k]) for k in order))


def _replace(lp: Loop, **kw) -> Loop:
    d = dict(name=lp.name, extent=lp.extent, nominal=lp.nominal, kind=lp.kind,
             factor=lp.factor, reduction=lp.reduction)
    d.update(kw)
    return Loop(**d)


# -- sketches and schedules --------------------------------------------------

@dataclass(frozen=True)
class Sketch:
    workload: Workload
    steps: tuple[Transformation, ...] = ()
    space: SearchSpace = field(default_factory=SearchSpace)
    rules: tuple[str, ...] = ()

    @property
    def id(self) -> str:
        return f"{self.workload.name}:{'+'.join(self.rules) or 'naive'}"

    def __repr__(self) -> str:
        return f"Sketch({self.id}, dim={self.space.dimension}, size={self.space.size()})"


@dataclass(frozen=True)
class Schedule:
    sketch: Sketch
    coordinate: Coordinate
    nests: tuple[StageNest, ...]
    values: tuple[tuple[str, int], ...] = ()

    @property
    def workload(self) -> Workload:
        return self.sketch.workload

    def pretty(self) -> str:
        return format_schedule(self)


@dataclass(frozen=True)
class InvalidSchedule:
    """Marker for a structurally invalid annotation; measures as `invalid`."""
    sketch: Sketch
    coordinate: Coordinate
    reason: str


def _resolve(workload: Workload, steps: Sequence[Transformation],
             values: Mapping[str, int], worker_cap: int | None = None):
    builders = [_NestBuilder(st) for st in workload.stages()]
    invalid = None
    for step in steps:
        if isinstance(step, Inline):
            k = next(i for i, b in enumerate(builders) if b.stage.dst == step.producer)
            prod, cons = builders[k].stage, builders[k + 1].stage
            merged = Stage(cons.name, cons.axes, src=prod.src, dst=cons.dst,
                           ops=prod.ops + cons.ops)
            builders[k:k + 2] = [_NestBuilder(merged)]
            continue
        if isinstance(step, Fuse):
            b = next(b for b in builders if b.has(step.outer))
            b.fuse(step.outer, step.inner)
            continue
        b = next(b for b in builders if b.has(step.loop))
        v = values[step.slot]
        if isinstance(step, Tile):
            b.split(step.loop, v)
        elif isinstance(step, Vectorize):
            b.vectorize(step.loop, v)
        elif isinstance(step, Parallelize):
            if worker_cap is not None and v > worker_cap:
                invalid = f"{v} workers exceed the machine cap of {worker_cap}"
            b.mark(step.loop, "parallel", v)
        elif isinstance(step, Unroll):
            u = min(v, b.loops[b.pos(step.loop)].nominal)
            if u > 1:
                b.mark(step.loop, "unroll", u)
        else:
            raise TypeError(f"unknown transformation {step!r}")
    return tuple(b.freeze() for b in builders), invalid


def naive_schedule(w: Workload) -> Sketch:
    return Sketch(w)


def apply(sk: Sketch, c: Sequence[int], worker_cap: int | None = None
          ) -> Schedule | InvalidSchedule:
    """Bind `c` to the open slots of `sk` and resolve the loop nest.

    With `worker_cap` set, a workers slot above the cap yields InvalidSchedule.
    """
    c = sk.space.check(c)
    values = sk.space.values_of(c)
    nests, invalid = _resolve(sk.workload, sk.steps, values, worker_cap)
    if invalid:
        return InvalidSchedule(sk, c, invalid)
    return Schedule(sk, c, nests, tuple(values.items()))


# -- sketch generation -------------------------------------------------------

def _powers_of_two(limit: int) -> tuple[int, ...]:
    return tuple(1 << p for p in range(int(math.log2(limit)) + 1))


def _structure(w: Workload, steps, params) -> tuple[StageNest, ...]:
    values = {p.name: p.values[-1] for p in params}
    return _resolve(w, steps, values)[0]


def _rule_inline(w, nests, cores):
    if w.op != "elementwise" or len(nests) < 2:
        return None
    return [Inline(n.stage.dst) for n in nests[:-1]], []


def _rule_tile(w, nests, cores):
    order = {"matmul": ("i", "k", "j"), "conv2d": ("c", "f", "y", "x")}.get(w.op)
    if order is None:
        return None
    ext = w.loop_extents
    steps = [Tile(a, f"tile_{a}") for a in order]
    params = [ParamDef(f"tile_{a}", _powers_of_two(ext[a]), "tile") for a in order]
    return steps, params


def _rule_vectorize(w, nests, cores):
    steps, widest = [], 0
    for n in nests:
        inner = n.loops[-1]
        if inner.reduction or inner.kind != "serial":
            return None
        steps.append(Vectorize(inner.name, "vec"))
        widest = max(widest, inner.nominal)
    widths = tuple(v for v in VECTOR_WIDTHS if v <= widest)
    if len(widths) < 2:
        return None
    return steps, [ParamDef("vec", widths, "other")]


def _rule_parallel(w, nests, cores):
    steps = []
    for n in nests:
        lead = []
        for lp in n.loops:
            if lp.reduction or lp.kind != "serial" or not isinstance(lp.extent, E.Const):
                break
            lead.append(lp)
        if not lead:
            return None
        if len(lead) >= 2 and lead[1] is not n.loops[-1]:
            steps.append(Fuse(lead[0].name, lead[1].name))
            steps.append(Parallelize(f"{lead[0].name}.{lead[1].name}.fused", "workers"))
        else:
            steps.append(Parallelize(lead[0].name, "workers"))
    workers = tuple(sorted({1, 2, 4, max(1, cores)}))
    return steps, [ParamDef("workers", workers, "parallel")]


def _rule_unroll(w, nests, cores):
    steps = []
    for n in nests:
        target = next((lp for lp in reversed(n.loops) if lp.kind != "vectorize"), None)
        if target is None or target.kind != "serial":
            return None
        steps.append(Unroll(target.name, "unroll"))
    return steps, [ParamDef("unroll", UNROLL_VALUES, "unroll")]


_RULE_FUNCS = {"inline": _rule_inline, "tile": _rule_tile, "vectorize": _rule_vectorize,
               "parallel": _rule_parallel, "unroll": _rule_unroll}


def default_cores() -> int:
    return os.cpu_count() or 1


def generate_sketches(w: Workload, max_depth: int, cores: int | None = None) -> list[Sketch]:
    """All sketches reachable with at most `max_depth` rule applications.

    Rules apply in the canonical RULES order, so each rule set yields one
    sketch. The naive sketch is always first; the rest follow by depth.
    `cores` fixes the largest worker count offered by the parallel rule.
    """
    if max_depth < 0:
        raise ValueError("max_depth must be >= 0")
    cores = default_cores() if cores is None else cores
    out = [naive_schedule(w)]
    seen = {((), ())}
    frontier = [(naive_schedule(w), -1)]
    for _ in range(max_depth):
        nxt = []
        for sk, last in frontier:
            nests = _structure(w, sk.steps, sk.space.params)
            for r in range(last + 1, len(RULES)):
                res = _RULE_FUNCS[RULES[r]](w, nests, cores)
                if res is None:
                    continue
                steps, params = res
                child = Sketch(w, sk.steps + tuple(steps),
                               SearchSpace(sk.space.params + tuple(params)),
                               sk.rules + (RULES[r],))
                key = (child.steps, child.space.params)
                if key in seen:
                    continue
                seen.add(key)
                nxt.append((child, r))
        nxt.sort(key=lambda item: [RULES.index(x) for x in item[0].rules])
        out.extend(sk for sk, _ in nxt)
        frontier = nxt
    return out


# -- annotation initialization and mutation ----------------------------------

def draw_value_index(p: ParamDef, rng: random.Random,
                     unroll_weights: Mapping[int, float] | None = None) -> int:
    """Sample an index into `p.values` from the parameter's initial distribution."""
    if p.kind == "unroll":
        weights = UNROLL_WEIGHTS if unroll_weights is None else unroll_weights
        w = [weights.get(v, 0.0) for v in p.values]
        if sum(w) > 0:
            return rng.choices(range(len(p.values)), weights=w)[0]
    return rng.randrange(len(p.values))


def initialize_annotation(sk: Sketch, rng_seed: int,
                          unroll_weights: Mapping[int, float] | None = None) -> Coordinate:
    rng = random.Random(rng_seed)
    return tuple(draw_value_index(p, rng, unroll_weights) for p in sk.space.params)


# -- pretty printing ---------------------------------------------------------

def statement_text(stage: Stage, op: str) -> str:
    if op == "matmul":
        return "C[i, j] += A[i, k] * B[k, j]"
    if op == "conv2d":
        return "O[n, f, y, x] += I[n, c, y + r, x + s] * Wt[f, c, r, s]"
    if op == "reduce":
        return "Out[0] += A[k]"
    ax = stage.axes[0].name
    x = f"{stage.src}[{ax}]"
    for t in stage.ops:
        x = f"2 * {x} + {t}" if x.endswith("]") else f"2 * ({x}) + {t}"
    return f"{stage.dst}[{ax}] = {x}"


def format_schedule(s: Schedule) -> str:
    lines = [f"# {s.sketch.id}  " + ", ".join(f"{k}={v}" for k, v in s.values)]
    for nest in s.nests:
        depth = 0
        for lp in nest.loops:
            tag = "" if lp.kind == "serial" else f"{lp.kind}({lp.factor}) "
            lines.append("  " * depth + f"{tag}for {lp.name} in range({E.to_text(lp.extent)}):")
            depth += 1
        for ax, e in nest.index:
            if e != E.Var(ax):
                lines.append("  " * depth + f"{ax} = {E.to_text(e)}")
        lines.append("  " * depth + statement_text(nest.stage, s.workload.op))
    return "\n".join(lines)
