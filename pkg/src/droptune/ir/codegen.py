"""Lower a resolved Schedule to a C function.

Unroll factors 2, 4 and 8 get explicitly replicated bodies with a remainder
loop; any other factor falls back to a `#pragma GCC unroll` loop.
"""

from __future__ import annotations

from droptune.ir import expr as E
from droptune.ir.sketch import Loop, Schedule, StageNest

CTYPES = {"float64": "double", "int64": "int64_t"}
SPECIALIZED_UNROLL = (2, 4, 8)

PRELUDE = """#include <stdint.h>
#ifndef MIN
#define MIN(a, b) ((a) < (b) ? (a) : (b))
#endif
"""


def _linear(shape, idx) -> str:
    out = idx[0]
    for dim, i in zip(shape[1:], idx[1:]):
        out = f"({out}) * {dim} + {i}"
    return out


def _statement(s: Schedule, nest: StageNest) -> str:
    w = s.workload
    bufs = {b.name: b.shape for b in w.buffers()}
    if w.op == "matmul":
        c, a, b = _linear(bufs["C"], ["i", "j"]), _linear(bufs["A"], ["i", "k"]), \
            _linear(bufs["B"], ["k", "j"])
        return f"C[{c}] += A[{a}] * B[{b}];"
    if w.op == "conv2d":
        o = _linear(bufs["O"], ["n", "f", "y", "x"])
        i = _linear(bufs["I"], ["n", "c", "y + r", "x + s"])
        k = _linear(bufs["Wt"], ["f", "c", "r", "s"])
        return f"O[{o}] += I[{i}] * Wt[{k}];"
    if w.op == "reduce":
        return "Out[0] += A[k];"
    st = nest.stage
    ax = E.c_ident(st.axes[0].name)
    x = f"{st.src}[{ax}]"
    for t in st.ops:
        x = f"2 * ({x}) + {t}"
    return f"{st.dst}[{ax}] = {x};"


def _body(s: Schedule, nest: StageNest, pad: str) -> list[str]:
    lines = [f"{pad}const long {E.c_ident(ax)} = {E.to_c(e)};"
             for ax, e in nest.index if e != E.Var(ax)]
    lines.append(pad + _statement(s, nest))
    return lines


def _loops(s: Schedule, nest: StageNest, d: int, pad: str) -> list[str]:
    if d == len(nest.loops):
        return _body(s, nest, pad)
    lp: Loop = nest.loops[d]
    v = E.c_ident(lp.name)
    ext = E.to_c(lp.extent)
    inner = pad + "  "
    if lp.kind == "unroll" and lp.factor in SPECIALIZED_UNROLL:
        u = lp.factor
        out = [f"{pad}{{",
               f"{inner}const long {v}_n = {ext};",
               f"{inner}const long {v}_m = {v}_n - {v}_n % {u};",
               f"{inner}for (long {v}_b = 0; {v}_b < {v}_m; {v}_b += {u}) {{"]
        for t in range(u):
            out.append(f"{inner}  {{ const long {v} = {v}_b + {t};")
            out += _loops(s, nest, d + 1, inner + "    ")
            out.append(f"{inner}  }}")
        out.append(f"{inner}}}")
        out.append(f"{inner}for (long {v} = {v}_m; {v} < {v}_n; {v}++) {{")
        out += _loops(s, nest, d + 1, inner + "  ")
        out += [f"{inner}}}", f"{pad}}}"]
        return out
    out = []
    if lp.kind == "parallel":
        out.append(f"#pragma omp parallel for num_threads({lp.factor}) schedule(static)")
    elif lp.kind == "vectorize":
        out.append("#pragma omp simd")
    elif lp.kind == "unroll":
        out.append(f"#pragma GCC unroll {lp.factor}")
    out.append(f"{pad}for (long {v} = 0; {v} < {ext}; {v}++) {{")
    out += _loops(s, nest, d + 1, inner)
    out.append(f"{pad}}}")
    return out


def kernel_source(s: Schedule, fname: str, dtype: str = "float64") -> str:
    """C definition of `void fname(T* buf0, T* buf1, ...)` in workload buffer order."""
    ct = CTYPES[dtype]
    w = s.workload
    args = []
    for b in w.buffers():
        qual = "const " if b.role == "input" else ""
        args.append(f"{qual}{ct}* restrict {b.name}")
    lines = [f"void {fname}({', '.join(args)}) {{"]
    accumulating = w.op in ("matmul", "conv2d", "reduce")
    for b in w.buffers():
        if b.role == "output" and accumulating:
            lines.append(f"  for (long z = 0; z < {b.size}; z++) {b.name}[z] = 0;")
    for nest in s.nests:
        lines += _loops(s, nest, 0, "  ")
    lines.append("}")
    return "\n".join(lines) + "\n"
