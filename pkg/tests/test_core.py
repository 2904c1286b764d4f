import math
from fractions import Fraction

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from rankcdf.core import (
    CdfResult,
    RankRatioVector,
    joint_cdf,
    relative_deviation,
    v_factorial,
    v_linear_paper,
    v_quadratic,
    v_reference_smalln,
)
from rankcdf.errors import DimensionTooLargeError, ValidationError


def exact_volume(thresholds):
    """Iterated integral over 0 <= s_1 <= ... <= s_n, s_i <= r_i, in exact arithmetic."""
    n = len(thresholds)
    s = sp.symbols(f"s1:{n + 1}")
    expr = sp.Integer(1)
    for i in range(n - 1, -1, -1):
        lower = s[i - 1] if i > 0 else 0
        expr = sp.integrate(expr, (s[i], lower, sp.Rational(thresholds[i])))
    return Fraction(str(sp.nsimplify(expr)))


def hand_eq18(r):
    """The three-term recursion unrolled by hand, in linear scale."""
    v = [1.0, r[0]]
    for k in range(2, len(r) + 1):
        v.append(r[k - 1] * v[k - 1] - r[k - 2] ** 2 / 2 * v[k - 2])
    return v[len(r)]


sorted_vectors = st.integers(1, 8).flatmap(
    lambda n: st.lists(st.floats(0.0, 1.0), min_size=n, max_size=n).map(sorted)
)


class TestRankRatioVector:
    def test_rejects_unsorted(self):
        with pytest.raises(ValidationError, match="non-decreasing"):
            RankRatioVector([0.5, 0.2])

    @pytest.mark.parametrize("bad", [[-0.1], [1.5], [0.2, float("nan")]])
    def test_rejects_out_of_range(self, bad):
        with pytest.raises(ValidationError):
            RankRatioVector(bad)

    def test_clamps_rounding_noise(self):
        r = RankRatioVector([-1e-13, 0.5, 0.5 - 1e-13, 1 + 1e-13])
        assert r.values.tolist() == [0.0, 0.5, 0.5, 1.0]

    def test_empty_rejected_by_entry_points(self):
        with pytest.raises(ValidationError):
            v_quadratic([])

    def test_accepts_vector_instance(self):
        assert v_quadratic(RankRatioVector([0.5])).v == 0.5


class TestFactorial:
    def test_single(self):
        assert v_factorial([0.5]).v == 0.5

    def test_pair(self):
        assert v_factorial([0.2, 0.5]).v == pytest.approx(0.08, rel=1e-15)

    def test_full_simplex(self):
        res = v_factorial([1, 1, 1])
        assert res.v == pytest.approx(1 / 6, rel=1e-15)
        assert res.q == 1.0

    def test_cap(self):
        with pytest.raises(DimensionTooLargeError):
            v_factorial([1.0] * 17)

    def test_largest_allowed(self):
        assert v_factorial([1.0] * 16).q == pytest.approx(1.0, rel=1e-12)


class TestQuadratic:
    def test_single(self):
        res = v_quadratic([0.5])
        assert (res.v, res.q) == (0.5, 0.5)

    def test_triple(self):
        # r1 r2 r3 - r1 r2^2/2 - r1^2 r3/2 + r1^3/6 = 29/600
        assert v_quadratic([0.2, 0.5, 0.9]).v == pytest.approx(29 / 600, rel=1e-14)

    @pytest.mark.parametrize("n", range(1, 21))
    def test_simplex_is_exact(self, n):
        assert v_quadratic([1.0] * n).q == 1.0

    def test_unstable_flag_raised_for_large_n(self):
        rng = np.random.default_rng(3)
        res = v_quadratic(np.sort(rng.random(100)))
        assert res.unstable
        assert res.cancellation > 1e12

    def test_small_n_is_stable(self):
        res = v_quadratic([0.1, 0.4, 0.6, 0.9])
        assert not res.unstable
        assert 1.0 <= res.cancellation < 1e3


class TestLinearPaper:
    def test_single(self):
        assert v_linear_paper([0.5]).v == 0.5

    def test_pair(self):
        assert v_linear_paper([0.2, 0.5]).v == pytest.approx(0.08, rel=1e-15)

    def test_witness_collapses_to_zero(self):
        res = v_linear_paper([0.5, 0.5, 0.5])
        assert res.v == 0.0
        assert res.log_v is None
        assert res.algorithm == "linear-paper"

    @pytest.mark.parametrize(
        "r",
        [[0.25], [0.25, 0.75], [0.5, 0.5, 0.5], [0.125, 0.5, 0.75], [0.25, 0.25, 1.0]],
    )
    def test_bitwise_hand_unrolled(self, r):
        assert v_linear_paper(r).v == hand_eq18(r)

    def test_no_overflow_for_huge_n(self):
        res = v_linear_paper(np.ones(10_000))
        assert res.log_v is not None or res.v <= 0
        assert not math.isnan(res.v)


class TestReference:
    @pytest.mark.parametrize("x", [0.0, 0.3, 1.0])
    def test_identity(self, x):
        assert v_reference_smalln([x]).v == x

    def test_pair(self):
        assert v_reference_smalln([0.25, 0.5]).v == 0.09375

    @pytest.mark.parametrize("r", [[0.0, 0.4], [0.0, 0.1, 0.9]])
    def test_zero_leading(self, r):
        assert v_reference_smalln(r).v == 0.0

    def test_cap(self):
        with pytest.raises(DimensionTooLargeError):
            v_reference_smalln([0.1, 0.2, 0.3, 0.4])


class TestExactOracle:
    """Symbolic integration on rational thresholds."""

    @pytest.mark.parametrize(
        "r",
        [
            ["1/5", "1/2", "9/10"],
            ["1/10", "3/10", "1/2", "4/5"],
            ["1/3", "1/2", "2/3", "3/4", "9/10"],
            ["1/7", "1/7", "2/7", "5/7", "6/7", "1"],
        ],
    )
    def test_exact_paths_match_integral(self, r):
        expected = float(exact_volume(r))
        floats = [float(Fraction(x)) for x in r]
        assert v_factorial(floats).v == pytest.approx(expected, rel=1e-13)
        assert v_quadratic(floats).v == pytest.approx(expected, rel=1e-12)

    def test_witness_exact(self):
        assert exact_volume(["1/2"] * 3) == Fraction(1, 48)


class TestProperties:
    @settings(max_examples=300, deadline=None)
    @given(sorted_vectors)
    def test_exact_paths_agree(self, r):
        a, b = v_factorial(r), v_quadratic(r)
        assert abs(a.v - b.v) <= 1e-10 * max(1e-300, b.v)
        if len(r) <= 3:
            ref = v_reference_smalln(r).v
            assert abs(a.v - ref) <= 1e-12 * max(ref, 1e-300)
            assert abs(b.v - ref) <= 1e-12 * max(ref, 1e-300)

    @settings(max_examples=200, deadline=None)
    @given(sorted_vectors)
    def test_range(self, r):
        n = len(r)
        for fn in (v_factorial, v_quadratic):
            res = fn(r)
            assert -1e-15 <= res.q <= 1 + 1e-12
            assert -1e-15 <= res.v <= 1 / math.factorial(n) * (1 + 1e-12)

    @settings(max_examples=200, deadline=None)
    @given(sorted_vectors, st.data())
    def test_majorization_monotone(self, r, data):
        shrink = data.draw(st.lists(st.floats(0, 1), min_size=len(r), max_size=len(r)))
        # s_i = r_i * u_i kept sorted by a running max below r
        s = np.minimum(np.maximum.accumulate(np.asarray(r) * np.asarray(shrink)), r)
        assert v_quadratic(s).v <= v_quadratic(r).v + 1e-12

    @settings(max_examples=100, deadline=None)
    @given(sorted_vectors)
    def test_zero_boundary(self, r):
        r = [0.0] + list(r[1:])
        assert v_factorial(r).v == 0.0
        assert v_quadratic(r).v == 0.0

    @settings(max_examples=100, deadline=None)
    @given(sorted_vectors)
    def test_q_is_scaled_v(self, r):
        res = v_quadratic(r)
        assert res.v * math.factorial(len(r)) == pytest.approx(res.q, rel=1e-12, abs=1e-300)
        if res.v > 0:
            assert res.log_v == pytest.approx(math.log(res.v), rel=1e-12)


def test_dispatch():
    assert joint_cdf([0.2, 0.5], "factorial").algorithm == "factorial"
    with pytest.raises(ValidationError):
        joint_cdf([0.5], "cubic")


def test_relative_deviation():
    assert relative_deviation(0.0, 0.0) == 0.0
    assert relative_deviation(1.0, 0.0) == 1.0
    assert relative_deviation(2.0, 1.0) == 0.5


def test_result_log_q():
    res = v_quadratic([0.5, 0.5])
    assert isinstance(res, CdfResult)
    assert res.log_q == pytest.approx(math.log(res.q))
