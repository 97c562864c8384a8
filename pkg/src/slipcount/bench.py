"""Prediction latency measurement.

The per-machine time budget assumes each slip classifies in under 40 ms
and a full 1500-slip batch in about a minute. This harness times the
actual predict path (preprocessing included) over in-memory rasters so
the numbers reflect compute, not disk.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .classifier import Model, predict


@dataclass(frozen=True)
class BenchmarkResult:
    images: int
    total_seconds: float
    mean_ms_per_image: float
    p95_ms_per_image: float


def benchmark_predict(
    model: Model, images: list[np.ndarray], warmup: int = 5
) -> BenchmarkResult:
    """Time predict over each image once, after a short warmup."""
    for img in images[:warmup]:
        predict(model, img)
    per_image = []
    t0 = time.perf_counter()
    for img in images:
        s = time.perf_counter()
        predict(model, img)
        per_image.append((time.perf_counter() - s) * 1000.0)
    total = time.perf_counter() - t0
    times = np.asarray(per_image)
    return BenchmarkResult(
        images=len(images),
        total_seconds=total,
        mean_ms_per_image=float(times.mean()),
        p95_ms_per_image=float(np.percentile(times, 95)),
    )
