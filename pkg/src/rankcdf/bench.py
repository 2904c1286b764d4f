"""Wall-clock scaling of the three joint CDF algorithms."""

from __future__ import annotations

import os
import platform
import statistics
import sys
import time

import numba
import numpy as np

from . import __version__
from .core import v_factorial, v_linear_paper, v_quadratic

DEFAULT_SIZES = {
    "linear-paper": (10_000, 100_000, 1_000_000),
    "quadratic": (100, 1_000, 10_000),
    "factorial": (4, 6, 8, 10, 12),
}
_FUNCS = {"linear-paper": v_linear_paper, "quadratic": v_quadratic, "factorial": v_factorial}
MIN_BATCH_SECONDS = 0.05


def machine_metadata() -> dict:
    return {
        "platform": platform.platform(),
        "machine": platform.machine(),
        "processor": platform.processor(),
        "python": sys.version.split()[0],
        "numpy": np.__version__,
        "numba": numba.__version__,
        "cpu_count": os.cpu_count(),
        "tool_version": __version__,
    }


def time_call(fn, arg, repeats: int = 5) -> float:
    """Median seconds per call, batching fast calls up to ``MIN_BATCH_SECONDS``."""
    fn(arg)
    number = 1
    while True:
        t0 = time.perf_counter()
        for _ in range(number):
            fn(arg)
        elapsed = time.perf_counter() - t0
        if elapsed >= MIN_BATCH_SECONDS or number >= 1 << 20:
            break
        number *= 2 if elapsed <= 0 else max(2, int(MIN_BATCH_SECONDS / elapsed) + 1)
    samples = [elapsed / number]
    for _ in range(repeats - 1):
        t0 = time.perf_counter()
        for _ in range(number):
            fn(arg)
        samples.append((time.perf_counter() - t0) / number)
    return statistics.median(samples)


def loglog_slope(sizes, seconds) -> float | None:
    if len(sizes) < 2:
        return None
    slope, _ = np.polyfit(np.log(np.asarray(sizes, float)), np.log(np.asarray(seconds, float)), 1)
    return float(slope)


def run_bench(sizes: dict | None = None, repeats: int = 5, seed: int = 0) -> dict:
    sizes = {**DEFAULT_SIZES, **(sizes or {})}
    rng = np.random.default_rng(seed)
    results = {}
    for name in ("linear-paper", "quadratic", "factorial"):
        ns = list(sizes.get(name) or ())
        medians = []
        for n in ns:
            R = np.sort(rng.random(n))
            medians.append(time_call(_FUNCS[name], R, repeats))
        results[name] = {
            "sizes": ns,
            "median_seconds": medians,
            "loglog_slope": loglog_slope(ns, medians),
        }
    return {"algorithms": results, "machine": machine_metadata(), "repeats": repeats}
