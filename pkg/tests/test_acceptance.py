"""Exit criteria, one test per criterion, at the stated tolerances and time limits.

Timings exclude the one-off JIT compilation, which the ``warm`` fixture pays
up front.
"""

import json
import time

import numpy as np
import pytest

from rankcdf.bench import run_bench
from rankcdf.cli import main
from rankcdf.core import (
    relative_deviation,
    v_factorial,
    v_linear_paper,
    v_quadratic,
    v_reference_smalln,
)
from rankcdf.nullsim import NullSimConfig, run_uniformity_experiment, volume_oracle


@pytest.fixture(scope="module", autouse=True)
def warm():
    v_quadratic([0.5, 0.6])
    v_linear_paper([0.5, 0.6])


class Timer:
    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.start


def test_c01_exact_path_equivalence():
    """C1 exact paths: factorial vs quadratic <= 1e-9 rel (n=1..8, 200 each); reference <= 1e-12; < 5 s"""
    rng = np.random.default_rng(20261014)
    worst_exact = worst_ref = 0.0
    with Timer() as t:
        for n in range(1, 9):
            for _ in range(200):
                r = np.sort(rng.random(n))
                f, q = v_factorial(r).v, v_quadratic(r).v
                worst_exact = max(worst_exact, relative_deviation(f, q))
                if n <= 3:
                    ref = v_reference_smalln(r).v
                    worst_ref = max(worst_ref, relative_deviation(f, ref), relative_deviation(q, ref))
    print(f"max rel factorial~quadratic={worst_exact:.3e} reference={worst_ref:.3e} t={t.elapsed:.2f}s")
    assert worst_exact <= 1e-9
    assert worst_ref <= 1e-12
    assert t.elapsed < 5


def test_c02_simplex_normalization():
    """C2 simplex normalization: quadratic q([1]*n) = 1 within 1e-9 for n=1..20; < 1 s"""
    with Timer() as t:
        qs = [v_quadratic([1.0] * n).q for n in range(1, 21)]
    assert max(abs(q - 1) for q in qs) <= 1e-9
    assert t.elapsed < 1


def test_c03_monte_carlo_oracle():
    """C3 Monte Carlo oracle: quadratic q within 4 SE of 1e6-sample oracle, 10 R per n in {2,3,5}; < 60 s"""
    rng = np.random.default_rng(7)
    misses = []
    with Timer() as t:
        for n in (2, 3, 5):
            for j in range(10):
                r = np.sort(rng.random(n))
                est, se = volume_oracle(r, 10**6, seed=1000 * n + j)
                q = v_quadratic(r).q
                if abs(est - q) > 4 * se:
                    misses.append((n, r.tolist(), est, q, se))
    assert not misses, misses
    assert t.elapsed < 60


def test_c04_min_ratio_law():
    """C4 min-ratio law 1-(1-x)^n: KS D <= 0.01 at 1e5 null trials for n in {2,5}; < 30 s"""
    with Timer() as t:
        ds = {
            n: run_uniformity_experiment(NullSimConfig(n, 20, 10**5, 0, "min-ratio")).statistics["ks_statistic"]
            for n in (2, 5)
        }
    print(f"D={ds} t={t.elapsed:.1f}s")
    assert all(d <= 0.01 for d in ds.values())
    assert t.elapsed < 30


def test_c05_stuart_q_not_uniform():
    """C5 Stuart Q under the null (L=5, 1e4 trials, seed 0): KS rejects uniformity at alpha=1e-3; < 30 s"""
    with Timer() as t:
        s = run_uniformity_experiment(NullSimConfig(5, 20, 10**4, 0, "stuart-q")).statistics
    print(f"D={s['ks_statistic']:.4f} critical={s['critical_value']:.4f}")
    assert s["alpha"] == 1e-3
    assert s["ks_statistic"] > s["critical_value"]
    assert s["rejects_uniformity"]
    assert t.elapsed < 30


def test_c06_linear_recursion_audit(tmp_path):
    """C6 linear-path audit: witness -> <= 1e-12 vs exact 0.0208333 +- 1e-12; audit exits 0; n<=2 agree 1e-12; < 5 s"""
    with Timer() as t:
        lin = v_linear_paper([0.5, 0.5, 0.5]).v
        ref = v_reference_smalln([0.5, 0.5, 0.5]).v
        out = tmp_path / "audit.json"
        code = main(["audit", "-o", str(out)])
    doc = json.loads(out.read_text())
    checks = doc["statistics"]["checks"]
    assert abs(lin) <= 1e-12
    assert abs(ref - 0.5 ** 3 / 6) <= 1e-12
    assert abs(ref - 0.0208333) <= 1e-7
    assert code == 0
    assert checks["witness_deviation_detected"]["deviation"] >= 0.02
    assert checks["linear_matches_quadratic_n_le_2"]["max_rel"] <= 1e-12
    assert t.elapsed < 5


def test_c07_complexity_scaling():
    """C7 scaling: linear slope 1.0+-0.3 (1e4..1e6), quadratic slope 2.0+-0.3 (1e2..1e4); linear 1e6 < 1 s; < 120 s"""
    with Timer() as t:
        res = run_bench({"factorial": (4, 8, 12)}, repeats=5)["algorithms"]
    lin, quad = res["linear-paper"], res["quadratic"]
    print(f"linear slope={lin['loglog_slope']:.3f} quadratic slope={quad['loglog_slope']:.3f} "
          f"linear@1e6={lin['median_seconds'][-1]:.4f}s")
    assert lin["sizes"] == [10**4, 10**5, 10**6]
    assert quad["sizes"] == [10**2, 10**3, 10**4]
    assert 0.7 <= lin["loglog_slope"] <= 1.3
    assert 1.7 <= quad["loglog_slope"] <= 2.3
    assert lin["median_seconds"][-1] < 1.0
    assert t.elapsed < 120


@pytest.fixture(scope="module")
def validate_reports(tmp_path_factory):
    d = tmp_path_factory.mktemp("validate")
    runs = {}
    for name, workers in (("w1", "1"), ("w2", "2")):
        out = d / f"{name}.json"
        t0 = time.perf_counter()
        code = main(["validate", "--seed", "0", "--workers", workers, "-o", str(out)])
        runs[name] = (code, out.read_bytes(), time.perf_counter() - t0)
    return runs


def test_c08_proposed_calibration_report(validate_reports):
    """C8 validate emits proposed-p KS statistic + histogram at L in {3,10,30}, N=20, 1e4 trials, no verdict; < 60 s"""
    code, raw, elapsed = validate_reports["w1"]
    doc = json.loads(raw)
    sections = doc["statistics"]["proposed_p"]
    assert [s["config"]["num_lists"] for s in sections] == [3, 10, 30]
    for s in sections:
        assert s["config"]["universe_size"] == 20
        assert s["config"]["trials"] == 10**4
        for scaled in s["statistics"]["scalings"].values():
            assert 0.0 <= scaled["ks_statistic"] <= 1.0
            assert sum(scaled["histogram_counts"]) == 10**4
            assert "rejects_uniformity" not in scaled and "verdict" not in scaled
        assert "rejects_uniformity" not in s["statistics"]
    assert code == 0
    assert elapsed < 60


def test_c09_validate_deterministic(validate_reports):
    """C9 determinism: validate twice with the same seed is byte-identical across worker counts"""
    (c1, a, _), (c2, b, _) = validate_reports["w1"], validate_reports["w2"]
    assert c1 == c2 == 0
    assert a == b


def test_c10_end_to_end_combine(tmp_path):
    """C10 end-to-end combine: identical lists, reversed pair, single list in stuart mode"""

    def files(*orders):
        paths = []
        for order in orders:
            p = tmp_path / f"in{len(list(tmp_path.iterdir()))}.tsv"
            p.write_text("\n".join(order) + "\n")
            paths.append(str(p))
        return paths

    def run(argv):
        out = tmp_path / "out.json"
        assert main(argv + ["-o", str(out)]) == 0
        rows = json.loads(out.read_text())["rows"]
        return [r["element_id"] for r in rows], [r["p_value"] for r in rows]

    order, p = run(["combine", *files("abc", "abc", "abc")])
    assert order == ["a", "b", "c"]
    assert p == [0, 0, 0.5]

    order, p = run(["combine", *files("ab", "ba")])
    assert order == ["a", "b"]
    assert p == [0.5, 0.5]

    order, p = run(["combine", "--mode", "stuart", *files(["q", "w", "e", "r"])])
    assert order == ["q", "w", "e", "r"]
    assert p == [0.25, 0.5, 0.75, 1.0]
