"""Joint CDF values of uniform order statistics.

For a non-decreasing threshold vector ``R = [r_1, ..., r_n]`` in ``[0, 1]``
the joint CDF value is the volume

    V(R) = int_0^{r_1} int_{s_1}^{r_2} ... int_{s_{n-1}}^{r_n} ds_n ... ds_1

and ``Q(R) = n! V(R)`` is the probability that the order statistics of
``n`` i.i.d. uniforms satisfy ``s_(i) <= r_i`` for every ``i``.

Three recursions are provided:

* :func:`v_factorial` -- the leave-one-out recursion
  ``V(R) = (1/n) sum_i (r_i - r_{i-1}) V(R_{-i})``, memoized over subsets.
* :func:`v_quadratic` -- the alternating recursion
  ``T_k = sum_{i=1}^k (-1)^{i-1} T_{k-i} r_{n-k+1}^i / i!`` with ``V = T_n``.
* :func:`v_linear_paper` -- the three-term recursion
  ``V_k = r_k V_{k-1} - (r_{k-1}^2 / 2) V_{k-2}``.  It is *not* equal to
  ``V(R)`` for ``n >= 3``; ``[0.5, 0.5, 0.5]`` gives 0 instead of 1/48.

All of them run in the Q-scale (accumulators multiplied by ``k!``) so that
``q`` stays representable when ``V`` would underflow.
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass
from typing import Sequence, Union

import numba
import numpy as np

from .errors import DimensionTooLargeError, ValidationError

FACTORIAL_MAX_N = 16
REFERENCE_MAX_N = 3
BOUND_TOLERANCE = 1e-12
CANCELLATION_LIMIT = 1e12

ALGORITHMS = ("quadratic", "linear-paper", "factorial")

_LN2 = math.log(2.0)


@dataclass(frozen=True)
class RankRatioVector:
    """Validated, non-decreasing thresholds in ``[0, 1]``.

    Violations of the bounds or of monotonicity by at most
    ``BOUND_TOLERANCE`` are absorbed (clamped); anything larger raises
    :class:`ValidationError`.
    """

    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _validate(self.values))

    @property
    def n(self) -> int:
        return int(self.values.shape[0])

    def __len__(self):
        return self.n


RankRatioLike = Union[RankRatioVector, Sequence[float], np.ndarray]


@dataclass(frozen=True)
class CdfResult:
    """Outcome of one joint CDF evaluation.

    ``q`` is computed natively by the scaled recursion; ``v`` and ``log_v``
    are derived from it.  ``log_v`` is ``None`` when ``q <= 0``.  For very
    large ``n`` the linear-scale ``v`` may underflow to 0 while ``log_v``
    remains finite.
    """

    v: float
    log_v: float | None
    q: float
    n: int
    algorithm: str
    unstable: bool = False
    cancellation: float = 0.0

    @property
    def log_q(self) -> float | None:
        if self.log_v is None:
            return None
        return self.log_v + math.lgamma(self.n + 1)


def _validate(values) -> np.ndarray:
    arr = np.array(values, dtype=np.float64, copy=True).reshape(-1)
    if not np.all(np.isfinite(arr)):
        raise ValidationError("thresholds must be finite")
    if arr.size == 0:
        return arr
    lo, hi = arr.min(), arr.max()
    if lo < -BOUND_TOLERANCE or hi > 1.0 + BOUND_TOLERANCE:
        raise ValidationError(
            f"thresholds must lie in [0, 1]; got range [{lo!r}, {hi!r}]"
        )
    steps = np.diff(arr)
    if steps.size and steps.min() < -BOUND_TOLERANCE:
        i = int(np.argmin(steps))
        raise ValidationError(
            f"thresholds must be non-decreasing; r[{i}]={arr[i]!r} > r[{i + 1}]={arr[i + 1]!r}"
        )
    np.clip(arr, 0.0, 1.0, out=arr)
    np.maximum.accumulate(arr, out=arr)
    return arr


def _coerce(R: RankRatioLike) -> np.ndarray:
    if isinstance(R, RankRatioVector):
        arr = R.values
    else:
        arr = _validate(R)
    if arr.size == 0:
        raise ValidationError("at least one threshold is required")
    return arr


def _finish(q: float, n: int, algorithm: str, unstable=False, cancellation=0.0, log_q=None):
    if log_q is None and q > 0 and math.isfinite(q):
        log_q = math.log(q)
    log_v = None if log_q is None else log_q - math.lgamma(n + 1)
    if q == 0:
        v = 0.0
    elif n <= 170 and math.isfinite(q):
        v = q / float(math.factorial(n))
    elif log_v is not None:
        v = math.exp(log_v)
    else:
        v = math.copysign(math.inf, q) if math.isinf(q) else math.nan
    if v >= sys.float_info.min and math.isfinite(v):
        log_v = math.log(v)
    return CdfResult(
        v=v,
        log_v=log_v,
        q=q,
        n=n,
        algorithm=algorithm,
        unstable=bool(unstable),
        cancellation=float(cancellation),
    )


# ---------------------------------------------------------------------------
# factorial path


def _factorial_q(r: np.ndarray) -> float:
    # W(S) = sum_{i in S} (r_i - r_pred(i)) W(S \ i), W(empty) = 1, with W = |S|! V.
    n = r.shape[0]
    rv = r.tolist()
    w = [0.0] * (1 << n)
    w[0] = 1.0
    bits = [(1 << i, rv[i]) for i in range(n)]
    for mask in range(1, 1 << n):
        acc = 0.0
        prev = 0.0
        for bit, ri in bits:
            if mask & bit:
                acc += (ri - prev) * w[mask ^ bit]
                prev = ri
        w[mask] = acc
    return w[-1]


def v_factorial(R: RankRatioLike) -> CdfResult:
    """Leave-one-out recursion over element subsets (``2^n`` subproblems).

    Every term is non-negative, so this path is numerically benign; it is
    meant as an oracle and is capped at ``n = 16``.
    """
    r = _coerce(R)
    n = r.shape[0]
    if n > FACTORIAL_MAX_N:
        raise DimensionTooLargeError(
            f"factorial algorithm supports n <= {FACTORIAL_MAX_N}, got n={n}"
        )
    return _finish(_factorial_q(r), n, "factorial")


# ---------------------------------------------------------------------------
# quadratic path


@numba.njit(cache=True)
def _quadratic_kernel(r):
    # Alongside W_k, propagate A_k = sum_i binom(k, i) x^i A_{k-i} (the same
    # recursion with every sign positive); A_n / |W_n| bounds the relative
    # error amplification of the alternating sums.
    n = r.shape[0]
    w = np.empty(n + 1)
    mag = np.empty(n + 1)
    w[0] = 1.0
    mag[0] = 1.0
    for k in range(1, n + 1):
        x = r[n - k]
        coef = 1.0
        acc = 0.0
        bound = 0.0
        for i in range(1, k + 1):
            # coef = binom(k, i) * x**i
            coef = coef * (k - i + 1) / i * x
            term = coef * w[k - i]
            if i % 2 == 1:
                acc += term
            else:
                acc -= term
            bound += coef * mag[k - i]
        w[k] = acc
        mag[k] = bound
    q = w[n]
    if not (np.isfinite(q) and np.isfinite(mag[n])):
        return q, np.inf
    if mag[n] == 0.0:
        return q, 0.0
    if q == 0.0:
        return q, np.inf
    return q, mag[n] / abs(q)


def v_quadratic(R: RankRatioLike) -> CdfResult:
    """Alternating O(n^2) recursion, evaluated as ``W_k = k! T_k``.

    ``cancellation`` is the error amplification factor of the alternating
    sums (1 means no cancellation at all); ``unstable`` is set once it
    exceeds ``CANCELLATION_LIMIT``, i.e. once no correct digit is guaranteed.
    """
    r = _coerce(R)
    q, worst = _quadratic_kernel(r)
    q = float(q)
    return _finish(
        q,
        r.shape[0],
        "quadratic",
        unstable=not (worst <= CANCELLATION_LIMIT),
        cancellation=worst,
    )


# ---------------------------------------------------------------------------
# linear path (reproduces the three-term recursion verbatim)

_RESCALE_BITS = 512
_BIG = 2.0 ** _RESCALE_BITS
_SMALL = 2.0 ** -_RESCALE_BITS


@numba.njit(cache=True)
def _linear_kernel(r):
    # Returns (mantissa, exponent) with W_n = mantissa * 2**exponent.
    n = r.shape[0]
    w2 = 1.0  # W_{k-2}
    w1 = r[0]  # W_{k-1}
    e = 0
    for k in range(2, n + 1):
        a = r[k - 2]
        cur = k * r[k - 1] * w1 - 0.5 * k * (k - 1) * (a * a) * w2
        w2 = w1
        w1 = cur
        m = max(abs(w1), abs(w2))
        if m > _BIG:
            w1 *= _SMALL
            w2 *= _SMALL
            e += _RESCALE_BITS
        elif 0.0 < m < _SMALL:
            w1 *= _BIG
            w2 *= _BIG
            e -= _RESCALE_BITS
    return w1, e


def v_linear_paper(R: RankRatioLike) -> CdfResult:
    """Three-term O(n) recursion, exactly as published.

    Agrees with the true joint CDF only for ``n <= 2``.  The scaled state
    ``W_k = k! V_k`` is renormalized by powers of two, so the result never
    overflows even where the recursion diverges; ``log_v`` is ``None`` when
    the recursion produces a non-positive value.
    """
    r = _coerce(R)
    n = r.shape[0]
    mant, e = _linear_kernel(r)
    mant = float(mant)
    e = int(e)
    log_q = math.log(mant) + e * _LN2 if mant > 0 else None
    q = math.ldexp(mant, e) if e < 1024 else math.copysign(math.inf, mant)
    return _finish(q, n, "linear-paper", log_q=log_q)


# ---------------------------------------------------------------------------
# closed forms


def v_reference_smalln(R: RankRatioLike) -> CdfResult:
    """Hand-integrated closed forms for ``n <= 3``."""
    r = _coerce(R)
    n = r.shape[0]
    if n > REFERENCE_MAX_N:
        raise DimensionTooLargeError(
            f"closed forms exist for n <= {REFERENCE_MAX_N}, got n={n}"
        )
    if n == 1:
        v = r[0]
    elif n == 2:
        r1, r2 = r
        v = r1 * r2 - r1 * r1 / 2
    else:
        r1, r2, r3 = r
        v = r1 * r2 * r3 - r1 * r2 * r2 / 2 - r1 * r1 * r3 / 2 + r1 ** 3 / 6
    v = float(v)
    q = v * math.factorial(n)
    log_v = math.log(v) if v > 0 else None
    return CdfResult(v=v, log_v=log_v, q=q, n=n, algorithm="reference")


_DISPATCH = {
    "quadratic": v_quadratic,
    "linear-paper": v_linear_paper,
    "factorial": v_factorial,
}


def joint_cdf(R: RankRatioLike, algorithm: str = "quadratic") -> CdfResult:
    """Evaluate ``V(R)`` with the named algorithm (default ``quadratic``)."""
    try:
        fn = _DISPATCH[algorithm]
    except KeyError:
        raise ValidationError(
            f"unknown algorithm {algorithm!r}; choose from {', '.join(ALGORITHMS)}"
        ) from None
    return fn(R)


def relative_deviation(a: float, b: float) -> float:
    """``|a - b| / max(|a|, |b|)``; 0 when both are 0."""
    scale = max(abs(a), abs(b))
    if scale == 0:
        return 0.0
    return abs(a - b) / scale
