"""Mini loop-nest IR: workloads, sketches, schedules."""

from droptune.ir.sketch import (
    RULES,
    UNROLL_VALUES,
    UNROLL_WEIGHTS,
    Fuse,
    Inline,
    InvalidSchedule,
    Loop,
    Parallelize,
    Schedule,
    Sketch,
    StageNest,
    Tile,
    Transformation,
    Unroll,
    Vectorize,
    apply,
    default_cores,
    draw_value_index,
    format_schedule,
    generate_sketches,
    initialize_annotation,
    naive_schedule,
)
from droptune.ir.workload import Axis, Buffer, Stage, Workload

__all__ = [
    "RULES", "UNROLL_VALUES", "UNROLL_WEIGHTS", "Axis", "Buffer", "Fuse", "Inline",
    "InvalidSchedule", "Loop", "Parallelize", "Schedule", "Sketch", "Stage", "StageNest",
    "Tile", "Transformation", "Unroll", "Vectorize", "Workload", "apply", "default_cores",
    "draw_value_index", "format_schedule", "generate_sketches", "initialize_annotation",
    "naive_schedule",
]
