"""Tensor workloads and their naive loop-nest structure."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

OPS = {
    "matmul": ("M", "N", "K"),
    "conv2d": ("N", "C", "H", "W", "F", "R", "S"),
    "elementwise": ("length", "extent"),
    "reduce": ("extent",),
}


@dataclass(frozen=True)
class Axis:
    name: str
    extent: int
    reduction: bool = False


@dataclass(frozen=True)
class Buffer:
    name: str
    shape: tuple[int, ...]
    role: str  # input | output | scratch

    @property
    def size(self) -> int:
        return math.prod(self.shape)


@dataclass(frozen=True)
class Stage:
    """One statement of the naive kernel plus the loops around it.

    `ops` lists the elementwise steps a stage performs; after inlining a
    single stage carries the steps of every producer it absorbed.
    """

    name: str
    axes: tuple[Axis, ...]
    src: str = ""
    dst: str = ""
    ops: tuple[int, ...] = ()

    @property
    def iterations(self) -> int:
        return math.prod(a.extent for a in self.axes)


@dataclass(frozen=True)
class Workload:
    name: str
    op: str
    shape: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.op not in OPS:
            raise ValueError(f"unknown workload op {self.op!r}; expected one of {sorted(OPS)}")
        missing = [k for k in OPS[self.op] if k not in self.shape]
        if missing:
            raise ValueError(f"workload {self.name!r} is missing shape fields {missing}")
        shape = {k: int(self.shape[k]) for k in OPS[self.op]}
        bad = [k for k, v in shape.items() if v < 1]
        if bad:
            raise ValueError(f"workload {self.name!r} has non-positive extents {bad}")
        object.__setattr__(self, "shape", shape)

    def __hash__(self):
        return hash((self.name, self.op, tuple(sorted(self.shape.items()))))

    @classmethod
    def matmul(cls, M: int, N: int, K: int, name: str = "") -> "Workload":
        return cls(name or f"matmul_{M}x{N}x{K}", "matmul", {"M": M, "N": N, "K": K})

    @classmethod
    def conv2d(cls, N, C, H, W, F, R, S, name: str = "") -> "Workload":
        shape = dict(N=N, C=C, H=H, W=W, F=F, R=R, S=S)
        return cls(name or "conv2d_" + "x".join(str(v) for v in shape.values()), "conv2d", shape)

    @classmethod
    def elementwise(cls, length: int, extent: int, name: str = "") -> "Workload":
        return cls(name or f"ew_{length}x{extent}", "elementwise",
                   {"length": length, "extent": extent})

    @classmethod
    def reduce(cls, extent: int, name: str = "") -> "Workload":
        return cls(name or f"reduce_{extent}", "reduce", {"extent": extent})

    @property
    def loop_extents(self) -> dict[str, int]:
        return {a.name: a.extent for st in self.stages() for a in st.axes}

    def stages(self) -> tuple[Stage, ...]:
        s = self.shape
        if self.op == "matmul":
            return (Stage("C", (Axis("i", s["M"]), Axis("j", s["N"]),
                                Axis("k", s["K"], True))),)
        if self.op == "conv2d":
            return (Stage("O", (Axis("n", s["N"]), Axis("f", s["F"]), Axis("y", s["H"]),
                                Axis("x", s["W"]), Axis("c", s["C"], True),
                                Axis("r", s["R"], True), Axis("s", s["S"], True))),)
        if self.op == "elementwise":
            n, e = s["length"], s["extent"]
            names = ["A"] + [f"T{t}" for t in range(1, n)] + ["Out"]
            return tuple(Stage(names[t], (Axis(f"i{t}", e),), src=names[t - 1],
                               dst=names[t], ops=(t,))
                         for t in range(1, n + 1))
        return (Stage("Out", (Axis("k", s["extent"], True),)),)

    def buffers(self) -> tuple[Buffer, ...]:
        s = self.shape
        if self.op == "matmul":
            return (Buffer("A", (s["M"], s["K"]), "input"),
                    Buffer("B", (s["K"], s["N"]), "input"),
                    Buffer("C", (s["M"], s["N"]), "output"))
        if self.op == "conv2d":
            return (Buffer("I", (s["N"], s["C"], s["H"] + s["R"] - 1, s["W"] + s["S"] - 1),
                           "input"),
                    Buffer("Wt", (s["F"], s["C"], s["R"], s["S"]), "input"),
                    Buffer("O", (s["N"], s["F"], s["H"], s["W"]), "output"))
        if self.op == "elementwise":
            n, e = s["length"], s["extent"]
            return ((Buffer("A", (e,), "input"),)
                    + tuple(Buffer(f"T{t}", (e,), "scratch") for t in range(1, n))
                    + (Buffer("Out", (e,), "output"),))
        return (Buffer("A", (s["extent"],), "input"), Buffer("Out", (1,), "output"))

    def iteration_count(self) -> int:
        """Executions of original statements in the naive kernel."""
        return sum(st.iterations for st in self.stages())

    def to_json(self) -> dict:
        return {"name": self.name, "op": self.op, **self.shape}

    @classmethod
    def from_json(cls, doc: dict) -> "Workload":
        op = doc.get("op")
        if op not in OPS:
            raise ValueError(f"unknown workload op {op!r}")
        return cls(doc.get("name") or op, op, {k: doc[k] for k in OPS[op] if k in doc})


def elementwise_op(t: int, x):
    """The t-th stage of an elementwise chain; exact for integers and doubles."""
    return 2 * x + t
