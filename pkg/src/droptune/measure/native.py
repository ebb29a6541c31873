"""Native measurement: compile schedules to C, load them with ctypes, time them.

Kernels for a batch of schedules are compiled into one shared library so
that a search round pays for a single compiler invocation.
"""

from __future__ import annotations

import ctypes
import hashlib
import logging
import os
import shlex
import subprocess
import tempfile
import threading
import time
from typing import Iterable, Mapping

import numpy as np

from droptune.ir.codegen import PRELUDE, kernel_source
from droptune.ir.sketch import InvalidSchedule, Schedule, default_cores
from droptune.ir.workload import Workload
from droptune.measure.sample import INVALID, OK, TIMEOUT, MeasureConfig, Sample

logger = logging.getLogger(__name__)

WORKERS_ENV = "DROPTUNE_MAX_WORKERS"
DEFAULT_CFLAGS = ("-O2", "-march=native", "-fopenmp", "-shared", "-fPIC")

# At most one timed evaluation in flight per process.
_TIMING_LOCK = threading.Lock()


class BackendError(RuntimeError):
    """The native toolchain is unavailable or a kernel failed to build."""


def worker_cap_from_env() -> int:
    raw = os.environ.get(WORKERS_ENV)
    if raw:
        try:
            cap = int(raw)
        except ValueError:
            raise BackendError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from None
        if cap >= 1:
            return cap
    return default_cores()


def make_inputs(w: Workload, dtype: str = "float64", seed: int = 0) -> dict[str, np.ndarray]:
    rng = np.random.default_rng(seed)
    out = {}
    for b in w.buffers():
        if b.role != "input":
            continue
        if dtype == "int64":
            out[b.name] = rng.integers(-8, 8, size=b.shape, dtype=np.int64)
        else:
            out[b.name] = rng.uniform(-1.0, 1.0, size=b.shape)
    return out


class NativeBackend:
    def __init__(self, dtype: str = "float64", worker_cap: int | None = None,
                 cc: str | None = None, cflags: Iterable[str] = DEFAULT_CFLAGS,
                 cache_dir: str | None = None, seed: int = 0):
        if dtype not in ("float64", "int64"):
            raise ValueError(f"unsupported dtype {dtype!r}")
        self.dtype = dtype
        self.worker_cap = worker_cap if worker_cap is not None else worker_cap_from_env()
        self.cc = shlex.split(cc or os.environ.get("CC", "cc"))
        self.cflags = list(cflags)
        self.seed = seed
        self._tmp = None
        if cache_dir is None:
            self._tmp = tempfile.TemporaryDirectory(prefix="droptune-")
            cache_dir = self._tmp.name
        os.makedirs(cache_dir, exist_ok=True)
        self.cache_dir = cache_dir
        self._kernels: dict[str, ctypes._CFuncPtr] = {}
        self._libs: list[ctypes.CDLL] = []
        self._buffers: dict[Workload, dict[str, np.ndarray]] = {}
        self._build_lock = threading.Lock()

    # -- compilation ----------------------------------------------------------

    def _key(self, s: Schedule) -> tuple[str, str]:
        body = kernel_source(s, "KERNEL", self.dtype)
        digest = hashlib.sha1(body.encode()).hexdigest()[:16]
        return f"k_{digest}", body

    def prepare(self, schedules: Iterable) -> None:
        """Compile every not-yet-built schedule in one compiler call."""
        with self._build_lock:
            pending = {}
            for s in schedules:
                if isinstance(s, InvalidSchedule):
                    continue
                name, body = self._key(s)
                if name not in self._kernels and name not in pending:
                    pending[name] = body.replace("void KERNEL(", f"void {name}(", 1)
            if not pending:
                return
            src = PRELUDE + "\n".join(pending.values())
            tag = hashlib.sha1(src.encode()).hexdigest()[:16]
            c_path = os.path.join(self.cache_dir, f"lib_{tag}.c")
            so_path = os.path.join(self.cache_dir, f"lib_{tag}.so")
            if not os.path.exists(so_path):
                with open(c_path, "w") as fh:
                    fh.write(src)
                cmd = [*self.cc, *self.cflags, "-o", so_path, c_path]
                try:
                    proc = subprocess.run(cmd, capture_output=True, text=True)
                except OSError as exc:
                    raise BackendError(f"cannot run C compiler {self.cc[0]!r}: {exc}") from exc
                if proc.returncode != 0:
                    raise BackendError(f"kernel compilation failed:\n{proc.stderr[-2000:]}")
            lib = ctypes.CDLL(so_path)
            self._libs.append(lib)
            for name in pending:
                fn = getattr(lib, name)
                fn.restype = None
                self._kernels[name] = fn

    def kernel(self, s: Schedule):
        name, _ = self._key(s)
        if name not in self._kernels:
            self.prepare([s])
        return self._kernels[name]

    # -- execution ------------------------------------------------------------

    def buffers(self, w: Workload) -> dict[str, np.ndarray]:
        bufs = self._buffers.get(w)
        if bufs is None:
            np_dtype = np.int64 if self.dtype == "int64" else np.float64
            bufs = make_inputs(w, self.dtype, self.seed)
            for b in w.buffers():
                if b.role != "input":
                    bufs[b.name] = np.zeros(b.shape, dtype=np_dtype)
            self._buffers[w] = bufs
        return bufs

    def _args(self, w: Workload, bufs: Mapping[str, np.ndarray]):
        return [bufs[b.name].ctypes.data_as(ctypes.c_void_p) for b in w.buffers()]

    def run(self, s: Schedule, inputs: Mapping[str, np.ndarray] | None = None
            ) -> dict[str, np.ndarray]:
        """Execute once and return copies of all output buffers."""
        w = s.workload
        fn = self.kernel(s)
        np_dtype = np.int64 if self.dtype == "int64" else np.float64
        bufs = dict(self.buffers(w))
        if inputs is not None:
            for k, v in inputs.items():
                bufs[k] = np.ascontiguousarray(v, dtype=np_dtype)
        for b in w.buffers():
            if b.role != "input":
                bufs[b.name] = np.zeros(b.shape, dtype=np_dtype)
        with _TIMING_LOCK:
            fn(*self._args(w, bufs))
        return {b.name: bufs[b.name].copy() for b in w.buffers() if b.role == "output"}

    def evaluate(self, s, cfg: MeasureConfig) -> Sample:
        if isinstance(s, InvalidSchedule):
            return Sample.failed(s.coordinate, INVALID, s.sketch.id)
        fn = self.kernel(s)
        bufs = self.buffers(s.workload)
        args = self._args(s.workload, bufs)
        limit = cfg.timeout_ms * 1e6
        timings = []
        with _TIMING_LOCK:
            for r in range(cfg.warmups + cfg.repeats):
                t0 = time.perf_counter_ns()
                fn(*args)
                dt = time.perf_counter_ns() - t0
                if dt > limit:
                    return Sample.failed(s.coordinate, TIMEOUT, s.sketch.id)
                if r >= cfg.warmups:
                    timings.append(float(dt))
        return Sample(s.coordinate, tuple(timings), OK, s.sketch.id)
