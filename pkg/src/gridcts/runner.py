"""Worker pool for independent solve tasks with order-preserving assembly.

Every task is a zero-argument callable over read-only shared state. Results
come back in submission order no matter how the pool schedules them, so any
report built from them is identical across worker counts. A task that
raises has the exception object placed in its result slot; siblings keep
running.

workers=1 is a plain sequential loop and doubles as the T_1 measurement
path for the parallel-efficiency metric eta_n = T_1 / (n * T_n).
"""

from __future__ import annotations

import time
from concurrent.futures import ProcessPoolExecutor, ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence, TypeVar

T = TypeVar("T")

_EXECUTORS = {"thread": ThreadPoolExecutor, "process": ProcessPoolExecutor}


@dataclass(frozen=True)
class RunTiming:
    n: int  # worker count
    t_1: float | None  # sequential wall seconds (None when not measured)
    t_n: float  # wall seconds of this run
    task_count: int


def execute_parallel(
    tasks: Sequence[Callable[[], T]],
    workers: int = 1,
    backend: str = "thread",
) -> tuple[list[T | Exception], RunTiming]:
    """Run tasks on a pool of `workers`; results keep the task order.

    backend "thread" shares state in-process; "process" requires picklable
    tasks (module-level functions bound with functools.partial) and sidesteps
    the interpreter lock for CPU-heavy batches.
    """
    if workers < 1:
        raise ValueError("workers must be >= 1")
    if backend not in _EXECUTORS:
        raise ValueError(f"unknown backend {backend!r}")

    start = time.perf_counter()
    results: list[T | Exception]
    if workers == 1:
        results = []
        for task in tasks:
            try:
                results.append(task())
            except Exception as exc:  # captured in the result slot
                results.append(exc)
    else:
        with _EXECUTORS[backend](max_workers=workers) as pool:
            futures = [pool.submit(_call, task) for task in tasks]
            results = [f.result() for f in futures]
    elapsed = time.perf_counter() - start

    timing = RunTiming(
        n=workers,
        t_1=elapsed if workers == 1 else None,
        t_n=elapsed,
        task_count=len(tasks),
    )
    return results, timing


def _call(task: Callable[[], T]) -> T | Exception:
    try:
        return task()
    except Exception as exc:
        return exc


def parallel_efficiency(timing: RunTiming) -> float:
    """eta_n = T_1 / (n * T_n)."""
    if timing.t_1 is None:
        raise ValueError("t_1 not measured; run the sequential path first")
    if timing.n < 1 or timing.t_1 <= 0 or timing.t_n <= 0:
        raise ValueError("timing fields must be positive")
    return timing.t_1 / (timing.n * timing.t_n)
