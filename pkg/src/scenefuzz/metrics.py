"""Campaign metrics: step tables, transfer rate, coverage, diffs, stats.

Undefined ratios (zero denominators, degenerate samples) are returned as
None and rendered as "---" in reports rather than raising. The statistical
tests use the normal approximation with tie correction (Mann-Whitney) and
the exact Student t distribution (paired t); exhaustive-enumeration oracles
for both live in the test suite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

from scipy.special import stdtr

from .oracles import EpisodeResult
from .scene import SceneConfig, SceneError, TaskKind


def transfer_rate(rates: Sequence[float]) -> list[float | None]:
    """Step-to-step transfer ratios; step 0 is defined as a 100% pass rate.

    ``rates`` are fractions in [0, 1], ordered by step. An entry is None
    when the preceding step's rate is zero.
    """
    out: list[float | None] = []
    prev = 1.0
    for r in rates:
        out.append(r / prev if prev > 0 else None)
        prev = r
    return out


def diff_metric(baseline: float, variant: float) -> float | None:
    """Signed relative difference (variant - baseline) / baseline."""
    if baseline < 0:
        raise ValueError("baseline rate must be >= 0")
    if baseline == 0:
        return None
    return (variant - baseline) / baseline


def mut_over_def(default_passes: float, mutated_passes: float | Sequence[float]) -> float | None:
    """Mutated-condition pass count (mean over repeats) over default passes."""
    if isinstance(mutated_passes, (int, float)):
        mean_mut = float(mutated_passes)
    else:
        reps = list(mutated_passes)
        if not reps:
            raise ValueError("need at least one repeat")
        mean_mut = sum(reps) / len(reps)
    if default_passes == 0:
        return None
    return mean_mut / default_passes


# --------------------------------------------------------------------------
# Trajectory coverage
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class CoverageReport:
    rows: int
    cols: int
    covered: int

    @property
    def total(self) -> int:
        return self.rows * self.cols

    @property
    def ratio(self) -> float:
        return self.covered / self.total


def _target_xy(item: SceneConfig | tuple[float, float]) -> tuple[float, float]:
    if isinstance(item, SceneConfig):
        p = item.target_a.pose.position
        return (p[0], p[1])
    return (float(item[0]), float(item[1]))


def trajectory_coverage(
    scenes: Iterable[SceneConfig | tuple[float, float]],
    grid: tuple[int, int] = (10, 10),
    table_half_extents: tuple[float, float] = (0.40, 0.40),
) -> CoverageReport:
    """Fraction of table grid cells hit by target positions across a suite."""
    rows, cols = grid
    if rows <= 0 or cols <= 0:
        raise ValueError("grid dimensions must be positive")
    hx, hy = table_half_extents
    cells: set[tuple[int, int]] = set()
    for item in scenes:
        x, y = _target_xy(item)
        if abs(x) > hx or abs(y) > hy:
            raise SceneError(f"target position ({x}, {y}) outside table bounds")
        col = min(cols - 1, int((x + hx) / (2 * hx) * cols))
        row = min(rows - 1, int((y + hy) / (2 * hy) * rows))
        cells.add((row, col))
    return CoverageReport(rows=rows, cols=cols, covered=len(cells))


# --------------------------------------------------------------------------
# Step aggregation
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class AggregateRow:
    policy: str
    task: TaskKind
    n: int
    grasp_count: int
    mid_count: int
    success_count: int

    def __post_init__(self) -> None:
        # Oracle hierarchy: a later step passing implies every earlier one did.
        if not (self.success_count <= self.mid_count <= self.grasp_count <= self.n):
            raise ValueError(
                f"step counts not monotone for ({self.policy}, {self.task.value}): "
                f"{self.success_count} <= {self.mid_count} <= {self.grasp_count} <= {self.n}"
            )

    @property
    def rates(self) -> tuple[float, float, float]:
        if self.n == 0:
            return (0.0, 0.0, 0.0)
        return (self.grasp_count / self.n, self.mid_count / self.n, self.success_count / self.n)


def aggregate_results(results: Iterable[tuple[str, EpisodeResult]]) -> list[AggregateRow]:
    """Group (policy label, result) pairs into per-(policy, task) step rows."""
    buckets: dict[tuple[str, TaskKind], list[EpisodeResult]] = {}
    for policy, res in results:
        buckets.setdefault((policy, res.task), []).append(res)
    rows = []
    for (policy, task), items in sorted(buckets.items(), key=lambda kv: (kv[0][0], kv[0][1].value)):
        rows.append(
            AggregateRow(
                policy=policy,
                task=task,
                n=len(items),
                grasp_count=sum(1 for r in items if r.grasp_correct),
                mid_count=sum(1 for r in items if r.mid_step),
                success_count=sum(1 for r in items if r.success),
            )
        )
    return rows


# --------------------------------------------------------------------------
# Statistical tests
# --------------------------------------------------------------------------


def _midranks(values: Sequence[float]) -> list[float]:
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        rank = (i + j) / 2.0 + 1.0
        for k in range(i, j + 1):
            ranks[order[k]] = rank
        i = j + 1
    return ranks


def mann_whitney_u(
    sample_a: Sequence[float], sample_b: Sequence[float]
) -> tuple[float, float | None, float]:
    """Two-sided Mann-Whitney U with tie-corrected normal approximation.

    Returns (U for sample_a, p two-sided or None when every value is tied,
    rank-biserial effect size 1 - 2U/(n_a*n_b)).
    """
    n1, n2 = len(sample_a), len(sample_b)
    if n1 == 0 or n2 == 0:
        raise ValueError("both samples must be non-empty")
    combined = list(sample_a) + list(sample_b)
    ranks = _midranks(combined)
    r1 = sum(ranks[:n1])
    u1 = r1 - n1 * (n1 + 1) / 2.0
    effect = 1.0 - 2.0 * u1 / (n1 * n2)

    n = n1 + n2
    tie_sizes: list[int] = []
    for v in set(combined):
        t = combined.count(v)
        if t > 1:
            tie_sizes.append(t)
    tie_term = sum(t**3 - t for t in tie_sizes)
    var = n1 * n2 / 12.0 * ((n + 1) - tie_term / (n * (n - 1)))
    if var <= 0:
        return (u1, None, effect)
    z = (u1 - n1 * n2 / 2.0) / math.sqrt(var)
    p = math.erfc(abs(z) / math.sqrt(2.0))
    return (u1, p, effect)


def paired_t(
    sample_a: Sequence[float], sample_b: Sequence[float]
) -> tuple[float | None, float | None, float | None]:
    """Paired two-sided t test with Cohen's d = mean(diff)/sd(diff).

    Degenerate inputs (zero difference variance) yield None for p, and for
    t and d too unless the mean difference is also zero.
    """
    if len(sample_a) != len(sample_b):
        raise ValueError("paired samples must have equal length")
    n = len(sample_a)
    if n < 2:
        raise ValueError("need at least two pairs")
    diffs = [x - y for x, y in zip(sample_a, sample_b)]
    mean = sum(diffs) / n
    var = sum((d - mean) ** 2 for d in diffs) / (n - 1)
    sd = math.sqrt(var)
    if sd == 0:
        if mean == 0:
            return (0.0, None, 0.0)
        return (None, None, None)
    t = mean / (sd / math.sqrt(n))
    d = mean / sd
    p = 2.0 * float(stdtr(n - 1, -abs(t)))
    return (t, p, d)
