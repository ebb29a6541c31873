"""Measurement backends, samples and the statistics used to compare them."""

from __future__ import annotations

from droptune.ir.sketch import InvalidSchedule, Schedule, Sketch, apply
from droptune.measure.sample import INF, INVALID, OK, TIMEOUT, MeasureConfig, Sample
from droptune.measure.stats import FIRST_BETTER, SECOND_BETTER, TIE, compare, wilcoxon_rank_sum
from droptune.measure.synthetic import FAMILIES, Landscape, SyntheticBackend


class SketchEvaluator:
    """Coordinate-level view of a schedule-level backend for one sketch."""

    def __init__(self, sketch: Sketch, backend):
        self.sketch = sketch
        self.backend = backend
        self.key = sketch.id

    def schedule(self, c):
        return apply(self.sketch, c, getattr(self.backend, "worker_cap", None))

    def prepare(self, coords) -> None:
        self.backend.prepare([self.schedule(c) for c in coords])

    def evaluate(self, c, cfg: MeasureConfig) -> Sample:
        s = self.schedule(c)
        if isinstance(s, InvalidSchedule):
            return Sample.failed(s.coordinate, INVALID, self.key)
        return self.backend.evaluate(s, cfg)


class CallableBackend:
    """Wrap `fn(coordinate) -> cost` (or None for invalid) as a zero-noise backend."""

    def __init__(self, fn, key: str = "fn"):
        self.fn = fn
        self.key = key

    def prepare(self, coords) -> None:
        pass

    def evaluate(self, c, cfg: MeasureConfig) -> Sample:
        c = tuple(c)
        v = self.fn(c)
        if v is None:
            return Sample.failed(c, INVALID, self.key)
        return Sample(c, (float(v),) * cfg.repeats, OK, self.key)


def bind(backend, sketch: Sketch):
    """Coordinate-level evaluator for `sketch` on a schedule-level backend."""
    if hasattr(backend, "evaluator_for"):
        return backend.evaluator_for(sketch)
    return SketchEvaluator(sketch, backend)


def evaluate(backend, subject, cfg: MeasureConfig) -> Sample:
    """Measure a Schedule (or InvalidSchedule) or a raw coordinate."""
    if isinstance(subject, InvalidSchedule):
        return Sample.failed(subject.coordinate, INVALID, subject.sketch.id)
    return backend.evaluate(subject, cfg)


__all__ = [
    "FAMILIES", "FIRST_BETTER", "INF", "INVALID", "OK", "SECOND_BETTER", "TIE", "TIMEOUT",
    "CallableBackend", "Landscape", "MeasureConfig", "Sample", "Schedule", "SketchEvaluator",
    "SyntheticBackend", "bind", "compare", "evaluate", "wilcoxon_rank_sum",
]
