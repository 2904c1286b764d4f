"""Monte Carlo experiments under the random-permutation null hypothesis.

Every trial draws its own generator from ``(master_seed, trial)``, so a
report depends only on its configuration and never on how trials are split
across worker processes.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import stats

from . import __version__
from .aggregation import RankedList, profile_from_ranks
from .core import (
    FACTORIAL_MAX_N,
    REFERENCE_MAX_N,
    RankRatioVector,
    relative_deviation,
    v_factorial,
    v_linear_paper,
    v_quadratic,
    v_reference_smalln,
)
from .errors import ValidationError

MODES = ("stuart-q", "proposed-p", "min-ratio", "theorem2", "volume-oracle")
KS_ALPHA = 1e-3
MIN_BIN_SAMPLES = 30
ECDF_GRID = np.linspace(0.0, 1.0, 21)
HIST_BINS = 20
WITNESS = (0.5, 0.5, 0.5)

_SEED_MASK = (1 << 64) - 1


@dataclass(frozen=True)
class NullSimConfig:
    num_lists: int
    universe_size: int
    trials: int
    master_seed: int = 0
    mode: str = "stuart-q"
    tracked_element: int = 0
    indices: tuple[int, ...] | None = None
    bins: int = 4
    thresholds: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValidationError(f"unknown mode {self.mode!r}")
        if self.trials < 1:
            raise ValidationError("trials must be >= 1")
        if self.num_lists < 1:
            raise ValidationError("num_lists must be >= 1")
        if self.universe_size < 2:
            raise ValidationError("universe_size must be >= 2")
        if not 0 <= self.tracked_element < self.universe_size:
            raise ValidationError("tracked_element must index the universe")
        if self.mode == "theorem2" and self.num_lists < 2:
            raise ValidationError("theorem2 diagnostic needs num_lists >= 2")
        if self.bins < 1:
            raise ValidationError("bins must be >= 1")

    def to_dict(self) -> dict:
        d = asdict(self)
        for key in ("indices", "thresholds"):
            if d[key] is not None:
                d[key] = list(d[key])
        return d


@dataclass
class SimReport:
    mode: str
    config: dict
    statistics: dict
    runtime: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "config": self.config,
            "statistics": self.statistics,
            "runtime": self.runtime,
        }


def _runtime() -> dict:
    return {"tool_version": __version__, "numpy_version": np.__version__}


def trial_rng(master_seed: int, trial: int) -> np.random.Generator:
    """Generator for one trial; a pure function of its two arguments."""
    return np.random.default_rng([master_seed & _SEED_MASK, trial])


def _permutations(rng: np.random.Generator, num_lists: int, universe_size: int) -> np.ndarray:
    base = np.broadcast_to(np.arange(universe_size), (num_lists, universe_size))
    return rng.permuted(base, axis=1)


def _tracked_ranks(perms: np.ndarray, element: int) -> np.ndarray:
    # 1-based position of ``element`` in every row.
    return np.argmax(perms == element, axis=1) + 1


def sample_null_lists(config: NullSimConfig, trial: int = 0) -> list[RankedList]:
    """The ``num_lists`` uniform random permutations used by ``trial``."""
    perms = _permutations(
        trial_rng(config.master_seed, trial), config.num_lists, config.universe_size
    )
    return [
        RankedList.from_order([str(e) for e in row], list_id=f"null-{trial}-{j}")
        for j, row in enumerate(perms)
    ]


def min_ratio_cdf(x: float, n: int) -> float:
    """``P(min of n uniforms <= x) = 1 - (1 - x)^n``."""
    if not 0.0 <= x <= 1.0:
        raise ValidationError(f"x must lie in [0, 1], got {x!r}")
    if n < 1:
        raise ValidationError("n must be >= 1")
    return -math.expm1(n * math.log1p(-x)) if x < 1.0 else 1.0


def min_ratio_pdf(x: float, n: int) -> float:
    if not 0.0 <= x <= 1.0:
        raise ValidationError(f"x must lie in [0, 1], got {x!r}")
    return n * (1.0 - x) ** (n - 1)


# ---------------------------------------------------------------------------
# per-trial statistics


def _trial_min_ratio(cfg: NullSimConfig, rng) -> np.ndarray:
    perms = _permutations(rng, cfg.num_lists, cfg.universe_size)
    ranks = _tracked_ranks(perms, cfg.tracked_element)
    # Jittered rank ratio (rank - U) / N is exactly U(0, 1) under the null.
    ratios = (ranks - rng.random(ranks.shape[0])) / cfg.universe_size
    return np.array([ratios.min()])


def _trial_stuart_q(cfg: NullSimConfig, rng) -> np.ndarray:
    perms = _permutations(rng, cfg.num_lists, cfg.universe_size)
    ratios = np.sort(_tracked_ranks(perms, cfg.tracked_element) / cfg.universe_size)
    return np.array([v_quadratic(ratios).q])


def _trial_profile(cfg: NullSimConfig, rng) -> np.ndarray:
    perms = _permutations(rng, cfg.num_lists, cfg.universe_size)
    return profile_from_ranks(_tracked_ranks(perms, cfg.tracked_element), cfg.universe_size)


def _trial_proposed_p(cfg: NullSimConfig, rng) -> np.ndarray:
    res = v_quadratic(_trial_profile(cfg, rng))
    return np.array([res.v, res.q, float(res.unstable)])


_TRIAL_FUNCS: dict[str, Callable] = {
    "min-ratio": _trial_min_ratio,
    "stuart-q": _trial_stuart_q,
    "proposed-p": _trial_proposed_p,
    "theorem2": _trial_profile,
}


def _run_block(cfg: NullSimConfig, start: int, stop: int) -> np.ndarray:
    fn = _TRIAL_FUNCS[cfg.mode]
    return np.stack([fn(cfg, trial_rng(cfg.master_seed, t)) for t in range(start, stop)])


def run_trials(cfg: NullSimConfig, workers: int = 1) -> np.ndarray:
    """Per-trial statistics stacked in trial order (shape ``trials x k``)."""
    if workers <= 1 or cfg.trials < 2 * workers:
        return _run_block(cfg, 0, cfg.trials)
    edges = np.linspace(0, cfg.trials, workers + 1).astype(int)
    with ProcessPoolExecutor(max_workers=workers) as pool:
        parts = pool.map(_run_block, [cfg] * workers, edges[:-1], edges[1:])
        return np.concatenate(list(parts))


# ---------------------------------------------------------------------------
# summaries


def ks_critical_value(n: int, alpha: float = KS_ALPHA) -> float:
    """Asymptotic Kolmogorov critical value for sample size ``n``."""
    return float(stats.kstwobign.isf(alpha) / math.sqrt(n))


def ks_summary(sample: np.ndarray, cdf: Callable = stats.uniform.cdf, alpha: float = KS_ALPHA) -> dict:
    sample = np.asarray(sample, dtype=np.float64)
    n = sample.shape[0]
    res = stats.kstest(sample, cdf, method="asymp")
    crit = ks_critical_value(n, alpha)
    return {
        "n": int(n),
        "ks_statistic": float(res.statistic),
        "p_value_asymptotic": float(res.pvalue),
        "alpha": alpha,
        "critical_value": crit,
    }


def distribution_summary(sample: np.ndarray) -> dict:
    sample = np.sort(np.asarray(sample, dtype=np.float64))
    counts, edges = np.histogram(np.clip(sample, 0.0, 1.0), bins=HIST_BINS, range=(0.0, 1.0))
    ecdf = np.searchsorted(sample, ECDF_GRID, side="right") / sample.shape[0]
    return {
        "ecdf_grid": ECDF_GRID.tolist(),
        "ecdf": ecdf.tolist(),
        "histogram_edges": edges.tolist(),
        "histogram_counts": counts.tolist(),
        "mean": float(sample.mean()),
        "distinct_values": int(np.unique(sample).shape[0]),
    }


def run_uniformity_experiment(config: NullSimConfig, workers: int = 1) -> SimReport:
    """Null distribution of one tracked element's statistic, with a KS test.

    ``min-ratio`` is tested against ``1 - (1 - x)^L``; ``stuart-q`` and
    ``proposed-p`` against U(0, 1).  Only the first two carry a verdict.
    """
    if config.mode not in ("min-ratio", "stuart-q", "proposed-p"):
        raise ValidationError(f"mode {config.mode!r} is not a uniformity experiment")
    data = run_trials(config, workers)
    L = config.num_lists
    if config.mode == "min-ratio":
        sample = data[:, 0]
        ks = ks_summary(sample, lambda x: 1.0 - (1.0 - np.clip(x, 0, 1)) ** L)
        statistics = {
            "reference": f"1 - (1 - x)^{L}",
            **ks,
            **distribution_summary(sample),
        }
    elif config.mode == "stuart-q":
        sample = data[:, 0]
        ks = ks_summary(sample)
        statistics = {
            "reference": "uniform(0, 1)",
            **ks,
            "rejects_uniformity": bool(ks["ks_statistic"] > ks["critical_value"]),
            **distribution_summary(sample),
        }
    else:
        statistics = {
            "reference": "uniform(0, 1)",
            "degenerate": L == 1,
            "unstable_trials": int(data[:, 2].sum()),
            "scalings": {
                "v": {**_ks_stats_only(data[:, 0]), **distribution_summary(data[:, 0])},
                "q": {**_ks_stats_only(data[:, 1]), **distribution_summary(data[:, 1])},
            },
        }
    return SimReport(config.mode, config.to_dict(), statistics, _runtime())


def _ks_stats_only(sample: np.ndarray) -> dict:
    # Diagnostic: statistic and p-value, deliberately without a verdict field.
    ks = ks_summary(sample)
    return {"n": ks["n"], "ks_statistic": ks["ks_statistic"], "p_value_asymptotic": ks["p_value_asymptotic"]}


def theorem2_diagnostic(config: NullSimConfig, workers: int = 1) -> SimReport:
    """Conditional law of ``(r_{i+1} - r_i) / (1 - r_i)`` given ``r_i``.

    The claim under test is that this ratio is U(0, 1).  Index ``i = 0`` uses
    ``r_0 = 0`` (the marginal of ``r_1``).  Pairs are binned by ``r_i``; bins
    with fewer than ``MIN_BIN_SAMPLES`` pairs are marked insufficient.  No
    verdict is produced.
    """
    if config.mode != "theorem2":
        raise ValidationError("config.mode must be 'theorem2'")
    N = config.universe_size
    indices = config.indices if config.indices is not None else tuple(range(N - 1))
    for i in indices:
        if not 0 <= i <= N - 2:
            raise ValidationError(f"index {i} outside 0..{N - 2}")
    profiles = run_trials(config, workers)
    full = np.hstack([np.zeros((profiles.shape[0], 1)), profiles])
    edges = np.linspace(0.0, 1.0, config.bins + 1)
    out = []
    for i in indices:
        lo_r, hi_r = full[:, i], full[:, i + 1]
        live = lo_r < 1.0
        ratio = (hi_r[live] - lo_r[live]) / (1.0 - lo_r[live])
        where = np.clip(np.searchsorted(edges, lo_r[live], side="right") - 1, 0, config.bins - 1)
        bins = []
        for b in range(config.bins):
            chunk = ratio[where == b]
            entry = {"r_low": float(edges[b]), "r_high": float(edges[b + 1]), "count": int(chunk.shape[0])}
            if chunk.shape[0] < MIN_BIN_SAMPLES:
                entry["status"] = "insufficient"
                entry["ks_statistic"] = None
            else:
                entry["status"] = "tested"
                entry.update(_ks_stats_only(chunk))
            bins.append(entry)
        out.append({"index": int(i), "saturated": int((~live).sum()), "bins": bins})
    return SimReport(config.mode, config.to_dict(), {"pairs": out}, _runtime())


def volume_oracle(R, samples: int, seed: int = 0, chunk: int = 1 << 16) -> tuple[float, float]:
    """Monte Carlo estimate of ``Q(R)`` and its binomial standard error.

    Sorts batches of ``n`` uniforms and counts how often every order
    statistic stays at or below its threshold.
    """
    r = RankRatioVector(R).values
    if r.size == 0:
        raise ValidationError("at least one threshold is required")
    if samples < 1000:
        raise ValidationError("samples must be >= 1000")
    rng = np.random.default_rng(seed & _SEED_MASK)
    hits = 0
    left = samples
    while left:
        m = min(chunk, left)
        u = np.sort(rng.random((m, r.shape[0])), axis=1)
        hits += int(np.count_nonzero(np.all(u <= r, axis=1)))
        left -= m
    p = hits / samples
    return p, math.sqrt(p * (1.0 - p) / samples)


def run_experiment(config: NullSimConfig, workers: int = 1) -> SimReport:
    if config.mode == "theorem2":
        return theorem2_diagnostic(config, workers)
    if config.mode == "volume-oracle":
        if config.thresholds is None:
            raise ValidationError("volume-oracle mode needs thresholds")
        est, se = volume_oracle(config.thresholds, config.trials, config.master_seed)
        exact = v_quadratic(config.thresholds)
        stats_ = {"q_estimate": est, "std_error": se, "q_quadratic": exact.q}
        return SimReport(config.mode, config.to_dict(), stats_, _runtime())
    return run_uniformity_experiment(config, workers)


# ---------------------------------------------------------------------------
# cross-algorithm audit


def _sorted_uniforms(rng, n: int) -> np.ndarray:
    return np.sort(rng.random(n))


def _pairwise(values: dict[str, float]) -> dict[str, tuple[float, float]]:
    names = sorted(values)
    out = {}
    for a_i, a in enumerate(names):
        for b in names[a_i + 1 :]:
            x, y = values[a], values[b]
            out[f"{a}~{b}"] = (abs(x - y), relative_deviation(x, y))
    return out


def evaluate_all(R: Sequence[float], algorithms: Sequence[str] | None = None) -> dict[str, float]:
    """``v`` from every algorithm applicable at this dimension.

    Algorithms named explicitly in ``algorithms`` are forced, so a factorial
    request beyond its cap raises instead of being skipped.
    """
    n = len(R)
    funcs = {
        "quadratic": v_quadratic,
        "linear-paper": v_linear_paper,
        "factorial": v_factorial,
        "reference": v_reference_smalln,
    }
    caps = {"factorial": FACTORIAL_MAX_N, "reference": REFERENCE_MAX_N}
    if algorithms is None:
        chosen = [a for a in funcs if n <= caps.get(a, n)]
    else:
        chosen = list(algorithms)
        if "reference" not in chosen and n <= REFERENCE_MAX_N:
            chosen.append("reference")
    out = {}
    for name in chosen:
        if name not in funcs:
            raise ValidationError(f"unknown algorithm {name!r}")
        out[name] = funcs[name](R).v
    return out


def audit_equivalence(
    dims: Sequence[int],
    samples_per_dim: int,
    seed: int = 0,
    algorithms: Sequence[str] | None = None,
) -> SimReport:
    """Compare every applicable algorithm on random sorted uniform vectors.

    Reports, per dimension and algorithm pair, the maximum absolute and
    relative deviation of ``v``; the witness ``[0.5, 0.5, 0.5]`` is always
    evaluated on top.
    """
    dims = [int(n) for n in dims]
    if not dims or min(dims) < 1:
        raise ValidationError("dims must be a non-empty list of positive integers")
    if samples_per_dim < 1:
        raise ValidationError("samples_per_dim must be >= 1")
    per_dim = []
    for n in dims:
        rng = trial_rng(seed, n)
        worst: dict[str, list[float]] = {}
        for _ in range(samples_per_dim):
            vals = evaluate_all(_sorted_uniforms(rng, n), algorithms)
            for pair, (a, r) in _pairwise(vals).items():
                cur = worst.setdefault(pair, [0.0, 0.0])
                cur[0] = max(cur[0], a)
                cur[1] = max(cur[1], r)
        per_dim.append(
            {
                "n": n,
                "samples": samples_per_dim,
                "pairs": {k: {"max_abs": v[0], "max_rel": v[1]} for k, v in sorted(worst.items())},
            }
        )
    wvals = evaluate_all(list(WITNESS))
    witness = {
        "thresholds": list(WITNESS),
        "values": wvals,
        "exact": 0.5 ** 3 / 6,
        "linear_deviation": abs(wvals["linear-paper"] - wvals["quadratic"]),
    }
    config = {
        "dims": dims,
        "samples_per_dim": samples_per_dim,
        "seed": seed,
        "algorithms": None if algorithms is None else list(algorithms),
    }
    return SimReport("audit", config, {"dims": per_dim, "witness": witness}, _runtime())
