"""Python bindings for the lirr semi-supervised domain adaptation library."""

from ._lirr import (
    BoundReport,
    LossReport,
    RunResult,
    Task,
    concentration_term,
    evaluate_task,
    gen_task,
    mi_decomposition,
    run_sweep_config,
    train,
)

__all__ = [
    "BoundReport",
    "LossReport",
    "RunResult",
    "Task",
    "concentration_term",
    "evaluate_task",
    "gen_task",
    "mi_decomposition",
    "run_sweep_config",
    "train",
]
