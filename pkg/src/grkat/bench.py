"""Kernel benchmark harness: looped vs vectorized vs fused group-rational
activation, following the fixed [batch, tokens, D] measurement grid.

Throughput is batches/second over repeated timed passes (best of
repeats); peak memory is the maximum resident set sampled at 10 ms in a
watcher thread.  The output checksum is a SHA-256 over the raw output
bytes: variants share a per-element operation order, so checksums of
the same configuration must agree exactly.
"""

from __future__ import annotations

import csv
import hashlib
import os
import threading
import time
from dataclasses import dataclass

import numpy as np
import psutil

from .grkan import ACT_KERNELS, GroupRationalParams
from .rational import RationalCoeffs


@dataclass
class BenchRow:
    variant: str
    g: int
    D: int
    batch: int
    tokens: int
    throughput: float  # batches / s
    peak_rss: int  # bytes
    checksum: str


class _RssSampler:
    def __init__(self, interval: float = 0.01):
        self.interval = interval
        self.peak = 0
        self._stop = threading.Event()
        self._thread = threading.Thread(target=self._run, daemon=True)

    def _run(self):
        proc = psutil.Process()
        while not self._stop.is_set():
            self.peak = max(self.peak, proc.memory_info().rss)
            self._stop.wait(self.interval)

    def __enter__(self):
        self._thread.start()
        return self

    def __exit__(self, *exc):
        self._stop.set()
        self._thread.join()
        return False


def bench_threads(requested: int | None = None) -> int:
    """Thread count for the fused kernel; GRKN_THREADS overrides.

    Clamped to numba's startup maximum (NUMBA_NUM_THREADS); raise that
    env var before the first import to oversubscribe a small host.
    """
    import numba

    limit = numba.config.NUMBA_NUM_THREADS
    env = os.environ.get("GRKN_THREADS")
    if env:
        requested = int(env)
    if not requested:
        requested = os.cpu_count() or 1
    return max(1, min(requested, limit))


def run_bench(g_list=(8,), d_list=(512,), batch: int = 64, tokens: int = 1000,
              repeats: int = 3, threads: int | None = None, seed: int = 0,
              dtype=np.float32, variants=("looped", "vectorized", "fused"),
              coeffs: RationalCoeffs | None = None) -> list[BenchRow]:
    """Sweep g x D; every variant of a configuration sees the same input."""
    import numba

    numba.set_num_threads(bench_threads(threads))
    if coeffs is None:
        coeffs = RationalCoeffs.identity()
    rows = []
    rng = np.random.default_rng(seed)
    for d in d_list:
        x = rng.standard_normal((batch, tokens, d)).astype(dtype)
        for g in g_list:
            params = GroupRationalParams.from_coeffs(d, g, coeffs)
            # perturb numerators so groups are distinguishable
            pr = np.random.default_rng(seed + g)
            params.numerators = params.numerators + 0.01 * pr.standard_normal(
                params.numerators.shape)
            for variant in variants:
                kernel = ACT_KERNELS[variant]
                out = kernel(params, x)  # warmup (and JIT compile for fused)
                checksum = hashlib.sha256(
                    np.ascontiguousarray(out).tobytes()).hexdigest()[:16]
                best = float("inf")
                with _RssSampler() as sampler:
                    for _ in range(repeats):
                        t0 = time.perf_counter()
                        kernel(params, x)
                        best = min(best, time.perf_counter() - t0)
                rows.append(BenchRow(variant, g, d, batch, tokens,
                                     throughput=batch / best,
                                     peak_rss=sampler.peak,
                                     checksum=checksum))
    return rows


def write_report(path, rows: list[BenchRow]):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["variant", "g", "D", "batch", "tokens",
                         "throughput_batches_per_s", "peak_rss_bytes",
                         "checksum"])
        for r in rows:
            writer.writerow([r.variant, r.g, r.D, r.batch, r.tokens,
                             f"{r.throughput:.3f}", r.peak_rss, r.checksum])
