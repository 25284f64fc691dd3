"""Inference wall time against batch size."""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .reasoner import CompiledProgram
from .valuation import AttributeEncoding, convert_facts

BATCH_SIZES = (1, 5, 10, 15, 20, 25, 30, 35, 40, 45, 50)
MIN_REPEATS = 5


@dataclass(frozen=True)
class BenchRow:
    batch: int
    mean_ms: float
    std_ms: float
    per_example_ms: float


def bench(cp: CompiledProgram, program, Z: np.ndarray, params=None, batch_sizes=BATCH_SIZES,
          repeats: int = MIN_REPEATS, warmup: int = 1) -> list[BenchRow]:
    """Time fact conversion plus reasoning on the first ``B`` scenes for each batch size.

    Compilation happens before the call and is not timed. Repetitions cycle
    through all batch sizes rather than finishing one size at a time.
    """
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    if max(batch_sizes) > Z.shape[0]:
        raise ValueError(f"need {max(batch_sizes)} scenes for the largest batch, got {Z.shape[0]}")
    enc = AttributeEncoding.from_language(program.lang, program.layout)

    def run(Zb):
        V0 = convert_facts(Zb, cp.table, program.lang, program.layout, program.background, params, enc)
        return cp.infer(V0)

    for B in batch_sizes:
        for _ in range(warmup):
            run(Z[:B])
    # round-robin over batch sizes so slow drift in machine speed hits every size alike
    times = {B: [] for B in batch_sizes}
    for _ in range(repeats):
        for B in batch_sizes:
            t0 = time.perf_counter()
            run(Z[:B])
            times[B].append((time.perf_counter() - t0) * 1e3)
    rows = []
    for B in batch_sizes:
        mean = float(np.mean(times[B]))
        rows.append(BenchRow(B, mean, float(np.std(times[B])), mean / B))
    return rows
