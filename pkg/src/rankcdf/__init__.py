"""Rank aggregation by joint CDF values of uniform order statistics."""

__version__ = "0.1.0"

from .core import (  # noqa: E402
    CdfResult,
    RankRatioVector,
    joint_cdf,
    v_factorial,
    v_linear_paper,
    v_quadratic,
    v_reference_smalln,
)
from .aggregation import (  # noqa: E402
    CombinedRanking,
    RankedList,
    RankProfile,
    build_rank_profile,
    combine,
    pad_missing,
    stuart_rank_ratios,
)
from .errors import DimensionTooLargeError, InputFileError, ValidationError  # noqa: E402

__all__ = [
    "CdfResult",
    "CombinedRanking",
    "DimensionTooLargeError",
    "InputFileError",
    "RankProfile",
    "RankRatioVector",
    "RankedList",
    "ValidationError",
    "build_rank_profile",
    "combine",
    "joint_cdf",
    "pad_missing",
    "stuart_rank_ratios",
    "v_factorial",
    "v_linear_paper",
    "v_quadratic",
    "v_reference_smalln",
]
