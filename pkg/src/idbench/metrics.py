"""Score-distribution statistics: d-prime, Wasserstein-1, FPIR, recovery.

Degradation effects are quantified by comparing a condition's score
distributions against the baseline run: d-prime separation per label
(mated vs mated, non-mated vs non-mated) and the Wasserstein-1 shift of
the (mated - non-mated) difference distribution. FPIR is the fraction of
probes whose difference is strictly negative. Recovery expresses how much
of an unmitigated shift a mitigation removed, in percent.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import MetricError


@dataclass
class ScoreSample:
    """A labeled bag of scores from one experiment cell."""

    values: np.ndarray
    label: str = "diff"  # mated | nonmated | diff
    condition: str = "original"
    demographic: str = ""
    matcher_name: str = ""

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)


def _values(sample) -> np.ndarray:
    values = sample.values if isinstance(sample, ScoreSample) else sample
    arr = np.asarray(values, dtype=np.float64).ravel()
    if arr.size and not np.all(np.isfinite(arr)):
        raise MetricError("scores must be finite")
    return arr


def dprime(x, y) -> float:
    """|mean difference| over the root mean of the two sample variances.

    Variances use the n-1 denominator. Zero pooled variance with unequal
    means is rejected rather than reported as infinity.
    """
    xv, yv = _values(x), _values(y)
    if xv.size < 2 or yv.size < 2:
        raise MetricError("sample too small for d-prime (need >= 2 per side)")
    pooled = (np.var(xv, ddof=1) + np.var(yv, ddof=1)) / 2.0
    delta = abs(float(np.mean(xv)) - float(np.mean(yv)))
    if pooled == 0.0:
        if delta == 0.0:
            return 0.0
        raise MetricError("degenerate variance")
    return delta / math.sqrt(pooled)


def wasserstein1(x, y) -> float:
    """Exact W1 between two empirical distributions.

    Integrates |F_x - F_y| over the merged sample support, which handles
    unequal sample sizes; for equal sizes it reduces to the mean absolute
    difference of the sorted samples.
    """
    xv, yv = np.sort(_values(x)), np.sort(_values(y))
    if xv.size == 0 or yv.size == 0:
        raise MetricError("empty sample")
    merged = np.sort(np.concatenate([xv, yv]))
    deltas = np.diff(merged)
    cdf_x = np.searchsorted(xv, merged[:-1], side="right") / xv.size
    cdf_y = np.searchsorted(yv, merged[:-1], side="right") / yv.size
    return float(np.sum(np.abs(cdf_x - cdf_y) * deltas))


def fpir(results) -> float:
    """Fraction of probes with a strictly negative (mated - nonmated) diff.

    Accepts RankOneResult objects or raw diff values. Multiply by 100 (or
    use fpir_percent) for the percent form.
    """
    diffs = [getattr(r, "diff", r) for r in results]
    if not diffs:
        raise MetricError("empty results")
    negative = sum(1 for d in diffs if d < 0)
    return negative / len(diffs)


def fpir_percent(results) -> float:
    return 100.0 * fpir(results)


def recovery_pct(w_unmitigated: float, w_mitigated: float) -> float:
    """Percent of an unmitigated distribution shift removed by mitigation."""
    if not w_unmitigated > 0:
        raise MetricError("zero unmitigated shift")
    if w_mitigated < 0:
        raise MetricError("negative mitigated shift")
    return 100.0 * (w_unmitigated - w_mitigated) / w_unmitigated


@dataclass
class Histogram:
    edges: np.ndarray
    counts: np.ndarray
    below: int
    above: int


def histogram(values, bins: int, value_range: tuple) -> Histogram:
    """Fixed-range histogram with out-of-range values tallied separately."""
    lo, hi = value_range
    if not lo < hi:
        raise MetricError(f"invalid range ({lo}, {hi})")
    if bins < 1:
        raise MetricError("bins must be >= 1")
    arr = _values(values)
    counts, edges = np.histogram(arr, bins=bins, range=(lo, hi))
    below = int(np.count_nonzero(arr < lo))
    above = int(np.count_nonzero(arr > hi))
    return Histogram(edges=edges, counts=counts, below=below, above=above)


@dataclass
class MetricReport:
    """Distribution metrics of one experiment cell versus the baseline."""

    condition: str
    demographic: str
    policy: str
    matcher_name: str
    dprime_mated: float
    dprime_nonmated: float
    wasserstein_shift: float
    fpir: float
    fpir_pct: float
    recovery_pct: float | None
    sample_sizes: dict = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        return {
            "condition": self.condition,
            "demographic": self.demographic,
            "policy": self.policy,
            "matcher_name": self.matcher_name,
            "dprime_mated": self.dprime_mated,
            "dprime_nonmated": self.dprime_nonmated,
            "wasserstein_shift": self.wasserstein_shift,
            "fpir": self.fpir,
            "fpir_pct": self.fpir_pct,
            "recovery_pct": self.recovery_pct,
            "sample_sizes": dict(sorted(self.sample_sizes.items())),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True, indent=2)


def build_report(
    baseline_results,
    cell_results,
    condition: str = "original",
    demographic: str = "",
    policy: str = "none",
    matcher_name: str = "",
    unmitigated_shift: float | None = None,
) -> MetricReport:
    """Assemble the per-cell metrics from rank-one result lists.

    ``unmitigated_shift`` (the same condition's policy=none shift) enables
    the recovery percentage for mitigation cells.
    """
    base_mated = np.array([r.mated_score for r in baseline_results])
    base_nonmated = np.array([r.nonmated_score for r in baseline_results])
    base_diff = np.array([r.diff for r in baseline_results])
    cell_mated = np.array([r.mated_score for r in cell_results])
    cell_nonmated = np.array([r.nonmated_score for r in cell_results])
    cell_diff = np.array([r.diff for r in cell_results])

    shift = wasserstein1(base_diff, cell_diff)
    recovery = None
    if unmitigated_shift is not None and unmitigated_shift > 0:
        recovery = recovery_pct(unmitigated_shift, shift)
    return MetricReport(
        condition=condition,
        demographic=demographic,
        policy=policy,
        matcher_name=matcher_name,
        dprime_mated=dprime(base_mated, cell_mated),
        dprime_nonmated=dprime(base_nonmated, cell_nonmated),
        wasserstein_shift=shift,
        fpir=fpir(cell_results),
        fpir_pct=fpir_percent(cell_results),
        recovery_pct=recovery,
        sample_sizes={
            "baseline_probes": len(baseline_results),
            "cell_probes": len(cell_results),
        },
    )
