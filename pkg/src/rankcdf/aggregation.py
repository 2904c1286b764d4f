"""Merge ranked lists into one ranking scored by joint CDF values.

Two scoring modes are supported:

``proposed``
    Lists are padded to a common universe of size ``N``.  Each element gets a
    rank profile: ``f_i`` is the fraction of lists placing it at rank ``i``,
    ``g`` is the running sum of ``f``, and ``r_i = 1 - g_{N-i}`` for
    ``i = 1..N-1``.  The element's p-value is ``V(r)``.

``stuart``
    No padding.  The element's rank ratios (rank / list length) over the lists
    containing it are sorted and scored by ``Q = n! V``.

Rank mass is stored as a uniform span over integer positions, which covers
plain entries (a span of one), ties and padded tails alike.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .core import ALGORITHMS, joint_cdf
from .errors import ValidationError

MODES = ("proposed", "stuart")
MASS_TOLERANCE = 1e-12


@dataclass(frozen=True)
class RankedList:
    """One input ranking (rank 1 = best).

    ``spans`` maps each element to the inclusive range of integer positions
    over which its unit rank mass is spread uniformly.  ``nominal_ranks``
    records literal fractional ranks where the strict padding mode snapped
    them onto the grid.
    """

    list_id: str
    entries: tuple[str, ...]
    spans: Mapping[str, tuple[int, int]]
    nominal_ranks: Mapping[str, float] = field(default_factory=dict)

    @classmethod
    def from_order(cls, entries: Iterable[str], list_id: str = "") -> "RankedList":
        """Build a tie-free list from elements in rank order."""
        return cls.from_groups([[e] for e in entries], list_id=list_id)

    @classmethod
    def from_groups(cls, groups: Iterable[Sequence[str]], list_id: str = "") -> "RankedList":
        """Build a list from tie groups in rank order.

        Members of a group share their positions: a group of size ``m``
        starting after position ``p`` gives each member uniform mass over
        ``p+1..p+m``.
        """
        entries: list[str] = []
        spans: dict[str, tuple[int, int]] = {}
        pos = 0
        for group in groups:
            group = list(group)
            if not group:
                continue
            lo, hi = pos + 1, pos + len(group)
            for e in group:
                if e in spans:
                    raise ValidationError(f"duplicate element {e!r} in list {list_id!r}")
                spans[e] = (lo, hi)
                entries.append(e)
            pos = hi
        return cls(list_id=list_id, entries=tuple(entries), spans=spans)

    def __len__(self):
        return len(self.entries)

    def __contains__(self, element):
        return element in self.spans

    def mean_rank(self, element: str) -> float:
        if element in self.nominal_ranks:
            return self.nominal_ranks[element]
        lo, hi = self.spans[element]
        return (lo + hi) / 2


@dataclass(frozen=True)
class RankProfile:
    element_id: str
    f: np.ndarray
    g: np.ndarray
    r: np.ndarray


@dataclass(frozen=True)
class RankingRow:
    element_id: str
    p_value: float
    log_p_value: float | None
    q_value: float
    rank: int
    unstable: bool = False


@dataclass(frozen=True)
class CombinedRanking:
    rows: tuple[RankingRow, ...]
    mode: str
    algorithm: str
    list_ids: tuple[str, ...]
    universe_size: int

    def order(self) -> list[str]:
        return [row.element_id for row in self.rows]


def universe_of(lists: Iterable[RankedList]) -> set[str]:
    out: set[str] = set()
    for lst in lists:
        out.update(lst.entries)
    return out


def pad_missing(
    lists: Sequence[RankedList],
    universe: Iterable[str] | None = None,
    strict: bool = False,
) -> list[RankedList]:
    """Append every missing universe element to the tail of each list.

    With ``k`` elements missing from a list of size ``n`` each one is given
    mean rank ``n + (k + 1) / 2``.  By default that is realized by spreading
    its mass uniformly over positions ``n+1..n+k``; with ``strict=True`` the
    whole mass sits on the single grid position nearest that mean (halves
    round up) and the literal value is kept in ``nominal_ranks``.
    """
    lists = list(lists)
    if not lists:
        raise ValidationError("at least one ranked list is required")
    full = universe_of(lists)
    if universe is not None:
        universe = set(universe)
        if not full <= universe:
            extra = sorted(full - universe)
            raise ValidationError(f"elements outside the universe: {extra[:5]}")
        full = universe
    out = []
    for lst in lists:
        missing = sorted(full.difference(lst.spans))
        if not missing:
            out.append(lst)
            continue
        n, k = len(lst), len(missing)
        spans = dict(lst.spans)
        nominal = dict(lst.nominal_ranks)
        if strict:
            mean = n + (k + 1) / 2
            cell = int(math.floor(mean + 0.5))
            for e in missing:
                spans[e] = (cell, cell)
                nominal[e] = mean
        else:
            for e in missing:
                spans[e] = (n + 1, n + k)
        out.append(
            RankedList(
                list_id=lst.list_id,
                entries=lst.entries + tuple(missing),
                spans=spans,
                nominal_ranks=nominal,
            )
        )
    return out


def profile_from_fractions(element_id: str, f: np.ndarray) -> RankProfile:
    """Derive ``g`` and ``r`` from a fraction-at-rank vector ``f``."""
    f = np.asarray(f, dtype=np.float64)
    N = f.shape[0]
    g = np.cumsum(f)
    # r_i = 1 - g_{N-i} = f_{N-i+1} + ... + f_N, accumulated from the tail so
    # that r_1 = f_N exactly and rounding cannot push r below 0.
    tail = np.cumsum(f[::-1])
    r = np.minimum(tail[: N - 1], 1.0)
    return RankProfile(element_id=element_id, f=f, g=g, r=r)


def profile_from_ranks(ranks: np.ndarray, universe_size: int) -> np.ndarray:
    """``r`` vector for an element with integer rank ``ranks[j]`` in list ``j``."""
    ranks = np.asarray(ranks)
    counts = np.bincount(ranks - 1, minlength=universe_size)
    f = counts / ranks.shape[0]
    return np.minimum(np.cumsum(f[::-1])[: universe_size - 1], 1.0)


def build_rank_profile(lists: Sequence[RankedList], element: str) -> RankProfile:
    """Rank profile of ``element`` over lists already padded to one universe."""
    if not lists:
        raise ValidationError("at least one ranked list is required")
    N = len(lists[0])
    f = np.zeros(N)
    for lst in lists:
        if len(lst) != N:
            raise ValidationError("lists must be padded to a common universe first")
        try:
            lo, hi = lst.spans[element]
        except KeyError:
            raise ValidationError(f"element {element!r} not in universe") from None
        f[lo - 1 : hi] += 1.0 / (hi - lo + 1)
    f /= len(lists)
    if abs(f.sum() - 1.0) > MASS_TOLERANCE:
        raise ValidationError(f"rank mass of {element!r} does not sum to 1")
    return profile_from_fractions(element, f)


def stuart_rank_ratios(lists: Sequence[RankedList], element: str) -> np.ndarray:
    """Sorted rank ratios of ``element`` over the (unpadded) lists containing it."""
    ratios = [lst.mean_rank(element) / len(lst) for lst in lists if element in lst]
    if not ratios:
        raise ValidationError(f"element {element!r} is absent from every list")
    return np.sort(np.asarray(ratios, dtype=np.float64))


def _sort_key(score: float, log_score: float | None, element: str):
    # Positive scores (possibly underflowed in linear scale) order by log;
    # zero and negative scores (linear-paper only) by value, ahead of them.
    if log_score is not None:
        return (1, log_score, element)
    return (0, score, element)


def combine(
    lists: Sequence[RankedList],
    mode: str = "proposed",
    algorithm: str = "quadratic",
    strict_padding: bool = False,
) -> CombinedRanking:
    """Merge ``lists`` into one ranking sorted by ascending p-value.

    Ties in score are broken by ascending element id.
    """
    if mode not in MODES:
        raise ValidationError(f"unknown mode {mode!r}; choose from {', '.join(MODES)}")
    if algorithm not in ALGORITHMS:
        raise ValidationError(
            f"unknown algorithm {algorithm!r}; choose from {', '.join(ALGORITHMS)}"
        )
    lists = list(lists)
    if not lists:
        raise ValidationError("at least one ranked list is required")
    universe = sorted(universe_of(lists))
    if len(universe) < 2:
        raise ValidationError("need at least two distinct elements to rank")

    scored = []
    if mode == "proposed":
        padded = pad_missing(lists, strict=strict_padding)
        for e in universe:
            res = joint_cdf(build_rank_profile(padded, e).r, algorithm)
            scored.append((e, res, res.v, res.log_v))
    else:
        for e in universe:
            res = joint_cdf(stuart_rank_ratios(lists, e), algorithm)
            scored.append((e, res, res.q, res.log_q))

    scored.sort(key=lambda t: _sort_key(t[2], t[3], t[0]))
    rows = tuple(
        RankingRow(
            element_id=e,
            p_value=p,
            log_p_value=log_p,
            q_value=res.q,
            rank=i,
            unstable=res.unstable,
        )
        for i, (e, res, p, log_p) in enumerate(scored, start=1)
    )
    return CombinedRanking(
        rows=rows,
        mode=mode,
        algorithm=algorithm,
        list_ids=tuple(lst.list_id for lst in lists),
        universe_size=len(universe),
    )
