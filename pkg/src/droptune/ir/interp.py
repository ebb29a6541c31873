"""Reference interpreter for resolved loop nests.

Walks a Schedule in plain Python. Slow, but independent of the C code
generator, which makes it the oracle for iteration counts, index coverage
and small-shape numerical results.
"""

from __future__ import annotations

from collections import Counter
from typing import Iterator, Mapping

import numpy as np

from droptune.ir import expr as E
from droptune.ir.sketch import Schedule, StageNest
from droptune.ir.workload import Workload, elementwise_op


def walk(nest: StageNest) -> Iterator[dict[str, int]]:
    """Yield the original-axis values of every body execution, in loop order."""
    loops = nest.loops
    bindings = nest.index
    env: dict[str, int] = {}

    def rec(d: int):
        if d == len(loops):
            yield {ax: E.evaluate(e, env) for ax, e in bindings}
            return
        lp = loops[d]
        for v in range(E.evaluate(lp.extent, env)):
            env[lp.name] = v
            yield from rec(d + 1)
        env.pop(lp.name, None)

    yield from rec(0)


def count_iterations(s: Schedule) -> int:
    """Original-statement executions; an inlined stage counts each absorbed op."""
    total = 0
    for nest in s.nests:
        per = len(nest.stage.ops) if s.workload.op == "elementwise" else 1
        total += per * sum(1 for _ in walk(nest))
    return total


def coverage_errors(s: Schedule) -> list[str]:
    """Empty when every nest visits each point of its iteration domain exactly once."""
    errors = []
    for nest in s.nests:
        axes = nest.stage.axes
        seen = Counter(tuple(pt[a.name] for a in axes) for pt in walk(nest))
        for pt, n in seen.items():
            if any(not 0 <= v < a.extent for v, a in zip(pt, axes)):
                errors.append(f"{nest.stage.name}: point {pt} out of bounds")
            elif n > 1:
                errors.append(f"{nest.stage.name}: point {pt} visited {n} times")
        expected = nest.stage.iterations
        inside = sum(1 for pt in seen
                     if all(0 <= v < a.extent for v, a in zip(pt, axes)))
        if inside != expected:
            errors.append(f"{nest.stage.name}: covered {inside} of {expected} points")
    return errors


def execute(s: Schedule, inputs: Mapping[str, np.ndarray]) -> dict[str, np.ndarray]:
    """Run the schedule on copies of `inputs`; returns every buffer."""
    w = s.workload
    bufs = {b.name: np.zeros(b.shape, dtype=_dtype(inputs)) for b in w.buffers()}
    for name, arr in inputs.items():
        bufs[name] = np.array(arr, copy=True)
    for nest in s.nests:
        st = nest.stage
        if w.op == "matmul":
            A, B, C = bufs["A"], bufs["B"], bufs["C"]
            for p in walk(nest):
                C[p["i"], p["j"]] += A[p["i"], p["k"]] * B[p["k"], p["j"]]
        elif w.op == "conv2d":
            I, Wt, O = bufs["I"], bufs["Wt"], bufs["O"]
            for p in walk(nest):
                n, f, y, x, c, r, q = (p[a] for a in ("n", "f", "y", "x", "c", "r", "s"))
                O[n, f, y, x] += I[n, c, y + r, x + q] * Wt[f, c, r, q]
        elif w.op == "reduce":
            A, Out = bufs["A"], bufs["Out"]
            for p in walk(nest):
                Out[0] += A[p["k"]]
        else:
            src, dst = bufs[st.src], bufs[st.dst]
            ax = st.axes[0].name
            for p in walk(nest):
                v = src[p[ax]]
                for t in st.ops:
                    v = elementwise_op(t, v)
                dst[p[ax]] = v
    return bufs


def reference_outputs(w: Workload, inputs: Mapping[str, np.ndarray]) -> dict[str, np.ndarray]:
    """Outputs computed with numpy directly from the workload definition."""
    if w.op == "matmul":
        return {"C": inputs["A"] @ inputs["B"]}
    if w.op == "conv2d":
        s = w.shape
        I, Wt = inputs["I"], inputs["Wt"]
        O = np.zeros((s["N"], s["F"], s["H"], s["W"]), dtype=I.dtype)
        for r in range(s["R"]):
            for q in range(s["S"]):
                patch = I[:, :, r:r + s["H"], q:q + s["W"]]
                O += np.einsum("nchw,fc->nfhw", patch, Wt[:, :, r, q])
        return {"O": O}
    if w.op == "reduce":
        return {"Out": np.array([inputs["A"].sum()], dtype=inputs["A"].dtype)}
    v = inputs["A"]
    for t in range(1, w.shape["length"] + 1):
        v = elementwise_op(t, v)
    return {"Out": v}


def _dtype(inputs):
    for arr in inputs.values():
        return np.asarray(arr).dtype
    return np.float64
