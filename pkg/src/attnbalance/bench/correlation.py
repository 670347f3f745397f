"""Joint distribution of single-image vs multi-image hallucination flags.

For each instance, X = 1 iff any single-image sub-question hallucinated.
When X = 1, Y = 1 iff any sibling image (one whose own sub-question was
clean) hallucinated in the joint multi-image response. When X = 0 there is
no initiating sub-question; Y = 1 then means the joint response hallucinated
on any image at all. That X = 0 convention is a modeling choice and is
recorded in the result metadata.

The correlation of the paired binary variables is the standard phi
coefficient, computed as Pearson correlation from raw moments:

    r = (n*sum(xy) - sum(x)*sum(y))
        / sqrt((n*sum(x^2) - sum(x)^2) * (n*sum(y^2) - sum(y)^2))
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Mapping, Sequence

from ..errors import DataError

CELLS = ((1, 1), (1, 0), (0, 1), (0, 0))

_X0_CONVENTION = (
    "when no single-image sub-question hallucinated, Y=1 means the joint "
    "response hallucinated on any image"
)


@dataclass(frozen=True)
class CorrelationResult:
    counts: dict[tuple[int, int], int]
    proportions: dict[tuple[int, int], float]
    pearson: float
    total: int
    metadata: dict

    def proportion(self, x: int, y: int) -> float:
        return self.proportions[(x, y)]


def correlation_analysis(
    single_flags: Mapping[str, Sequence[bool]],
    multi_flags: Mapping[str, Sequence[bool]],
) -> CorrelationResult:
    """Bin instances into the 2x2 (X, Y) table and correlate the pair."""
    if not single_flags:
        raise DataError("correlation analysis needs at least one instance")
    if set(single_flags) != set(multi_flags):
        missing = set(single_flags) ^ set(multi_flags)
        raise DataError(f"single/multi flags disagree on instance ids: {sorted(missing)[:5]}")
    xs: list[int] = []
    ys: list[int] = []
    for instance_id in sorted(single_flags):
        singles = [bool(v) for v in single_flags[instance_id]]
        multis = [bool(v) for v in multi_flags[instance_id]]
        if not singles:
            raise DataError(f"instance {instance_id} has no per-image flags")
        if len(singles) != len(multis):
            raise DataError(
                f"instance {instance_id}: {len(singles)} single flags vs {len(multis)} multi flags"
            )
        x = any(singles)
        if x:
            y = any(m for s, m in zip(singles, multis) if not s)
        else:
            y = any(multis)
        xs.append(int(x))
        ys.append(int(y))
    n = len(xs)
    counts = Counter(zip(xs, ys))
    cell_counts = {cell: counts.get(cell, 0) for cell in CELLS}
    proportions = {cell: count / n for cell, count in cell_counts.items()}
    sum_x = sum(xs)
    sum_y = sum(ys)
    sum_xy = sum(x * y for x, y in zip(xs, ys))
    var_x = n * sum_x - sum_x * sum_x  # n^2 * variance; x^2 == x for 0/1 values
    var_y = n * sum_y - sum_y * sum_y
    degenerate = var_x == 0 or var_y == 0
    if degenerate:
        pearson = float("nan")
    else:
        pearson = (n * sum_xy - sum_x * sum_y) / math.sqrt(var_x * var_y)
    return CorrelationResult(
        counts=cell_counts,
        proportions=proportions,
        pearson=pearson,
        total=n,
        metadata={"y_when_x_is_zero": _X0_CONVENTION, "degenerate": degenerate},
    )
