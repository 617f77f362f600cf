"""Segmentation evaluation: Dice, average symmetric surface distance,
diameter-binned overlap curves, cohort aggregation, and the paired Wilcoxon
signed-rank test used to compare cohorts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import rankdata

from .measure import measure_components
from .morphology import StructuringElement, binary_array, connected_components, surface_voxels
from .volume import VolumeGrid


@dataclass(frozen=True)
class CaseMetrics:
    case_id: str
    dice: float
    assd_mm: float
    assd_fallback_used: bool


@dataclass(frozen=True)
class OverlapBin:
    lo_mm: float
    mean_overlap: float
    n: int


@dataclass(frozen=True)
class OverlapBinCurve:
    """Mean component overlap per shortest-diameter bin.

    direction "gt_on_pred" covers ground-truth components against the whole
    prediction (a sensitivity proxy); "pred_on_gt" covers predicted
    components against the whole ground truth (a precision proxy).
    """

    direction: str
    bin_width_mm: float
    bins: list[OverlapBin] = field(default_factory=list)


@dataclass(frozen=True)
class WilcoxonResult:
    n_effective: int
    w_statistic: float
    p_two_sided: float
    method: str  # "exact" or "normal_approx"


@dataclass(frozen=True)
class CohortReport:
    n_cases: int
    dice_mean: float
    dice_std: float
    assd_mean: float
    assd_std: float
    fallback_count: int


def _check_dims(pred: VolumeGrid, gt: VolumeGrid) -> None:
    if pred.dims != gt.dims:
        raise ValueError(f"prediction dims {pred.dims} do not match ground truth dims {gt.dims}")


def dice(pred: VolumeGrid, gt: VolumeGrid) -> float:
    """2|P∩G| / (|P|+|G|); two empty masks agree perfectly (1.0)."""
    _check_dims(pred, gt)
    p = binary_array(pred)
    g = binary_array(gt)
    denom = int(p.sum()) + int(g.sum())
    if denom == 0:
        return 1.0
    return 2.0 * int((p & g).sum()) / denom


def assd(pred: VolumeGrid, gt: VolumeGrid) -> tuple[float, bool]:
    """Average symmetric surface distance in mm, pooled over both surfaces.

    All directed distances pred->gt and gt->pred are pooled into one mean
    (not a mean of the two directed means). If exactly one mask is empty the
    physical diagonal of the volume is returned with the fallback flag set;
    two empty masks give 0.0, also flagged.
    """
    _check_dims(pred, gt)
    from .morphology import directed_surface_distances

    p_surface = surface_voxels(pred)
    g_surface = surface_voxels(gt)
    if len(p_surface) == 0 and len(g_surface) == 0:
        return 0.0, True
    if len(p_surface) == 0 or len(g_surface) == 0:
        extent = np.array(gt.dims, dtype=np.float64) * np.array(gt.spacing)
        return float(np.linalg.norm(extent)), True
    d_pg = directed_surface_distances(p_surface, g_surface, gt.spacing)
    d_gp = directed_surface_distances(g_surface, p_surface, gt.spacing)
    pooled = (d_pg.sum() + d_gp.sum()) / (len(d_pg) + len(d_gp))
    return float(pooled), False


def _component_overlaps(
    component_source: VolumeGrid,
    reference: VolumeGrid,
    se: StructuringElement,
) -> list[tuple[float, float]]:
    """(shortest_diameter, overlap fraction) for every component of the source."""
    ref = binary_array(reference)
    cs = connected_components(component_source, se)
    measure_components(cs)
    out = []
    for comp in cs:
        idx = tuple(comp.voxels.T)
        overlap = float(ref[idx].sum()) / len(comp.voxels)
        out.append((comp.shortest_diameter_mm, overlap))
    return out


def _bin_overlaps(pairs, direction: str, bin_width_mm: float) -> OverlapBinCurve:
    if not pairs:
        return OverlapBinCurve(direction, bin_width_mm)
    sums: dict[int, list[float]] = {}
    for diameter, overlap in pairs:
        sums.setdefault(int(math.floor(diameter / bin_width_mm)), []).append(overlap)
    bins = [
        OverlapBin(k * bin_width_mm, float(np.mean(vals)), len(vals))
        for k, vals in sorted(sums.items())
    ]
    return OverlapBinCurve(direction, bin_width_mm, bins)


def overlap_curves(
    pred: VolumeGrid,
    gt: VolumeGrid,
    bin_width_mm: float = 2.5,
    se: StructuringElement = StructuringElement(),
) -> tuple[OverlapBinCurve, OverlapBinCurve]:
    """Per-component overlap fractions binned by shortest diameter.

    Each ground-truth component is scored by the fraction of its voxels the
    prediction covers; each predicted component by the fraction of its
    voxels inside the ground truth. Bins are half-open [k*w, (k+1)*w) and
    carry the unweighted mean over components.
    """
    _check_dims(pred, gt)
    if bin_width_mm <= 0:
        raise ValueError(f"bin width must be positive, got {bin_width_mm}")
    gt_pairs = _component_overlaps(gt, pred, se)
    pred_pairs = _component_overlaps(pred, gt, se)
    return (
        _bin_overlaps(gt_pairs, "gt_on_pred", bin_width_mm),
        _bin_overlaps(pred_pairs, "pred_on_gt", bin_width_mm),
    )


def pool_overlap_curves(curves: list[OverlapBinCurve]) -> OverlapBinCurve:
    """Merge per-case curves of one direction into a component-pooled curve."""
    if not curves:
        raise ValueError("no curves to pool")
    direction = curves[0].direction
    width = curves[0].bin_width_mm
    if any(c.direction != direction or c.bin_width_mm != width for c in curves):
        raise ValueError("can only pool curves with one direction and bin width")
    totals: dict[int, tuple[float, int]] = {}
    for curve in curves:
        for b in curve.bins:
            k = int(round(b.lo_mm / width))
            s, n = totals.get(k, (0.0, 0))
            totals[k] = (s + b.mean_overlap * b.n, n + b.n)
    bins = [
        OverlapBin(k * width, s / n, n) for k, (s, n) in sorted(totals.items())
    ]
    return OverlapBinCurve(direction, width, bins)


# -- paired Wilcoxon signed-rank test -------------------------------------------


def _exact_two_sided_p(ranks: np.ndarray, w_observed: float) -> float:
    """P(min(W+, W-) <= observed) over all 2^n sign assignments.

    Computed by convolving the signed-rank sum distribution over doubled
    ranks (always integers, ties included), which enumerates every sign
    assignment without materialising them.
    """
    doubled = np.rint(2.0 * ranks).astype(np.int64)
    total = int(doubled.sum())
    counts = np.zeros(total + 1, dtype=np.int64)
    counts[0] = 1
    for r in doubled:
        shifted = np.zeros_like(counts)
        shifted[r:] = counts[: total + 1 - r]
        counts = counts + shifted
    w2 = int(np.rint(2.0 * w_observed))
    s = np.arange(total + 1)
    in_tail = (s <= w2) | (s >= total - w2)
    return float(counts[in_tail].sum() / (2 ** len(ranks)))


def _normal_approx_p(ranks: np.ndarray, w_observed: float) -> float:
    n = len(ranks)
    mu = n * (n + 1) / 4.0
    tie_term = 0.0
    _, tie_counts = np.unique(ranks, return_counts=True)
    for t in tie_counts:
        tie_term += t**3 - t
    var = n * (n + 1) * (2 * n + 1) / 24.0 - tie_term / 48.0
    if var <= 0:
        return 1.0
    z = (w_observed - mu + 0.5) / math.sqrt(var)  # 0.5: continuity correction
    p = math.erfc(-z / math.sqrt(2.0))  # == 2 * Phi(z)
    return min(1.0, p)


def wilcoxon_signed_rank(a, b, exact_limit: int = 25) -> WilcoxonResult:
    """Two-sided paired Wilcoxon signed-rank test.

    Differences of exactly zero are dropped. Ranks of |d| use average ranks
    for ties; the statistic is W = min(W+, W-). The p-value is exact (full
    sign enumeration) for up to ``exact_limit`` effective pairs, otherwise a
    normal approximation with tie-corrected variance and a 0.5 continuity
    correction. No effective pairs at all gives p = 1.0.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 1 or b.ndim != 1:
        raise ValueError("paired samples must be one-dimensional")
    if len(a) != len(b):
        raise ValueError(f"paired samples differ in length: {len(a)} vs {len(b)}")
    if len(a) == 0:
        raise ValueError("paired samples must be non-empty")
    d = a - b
    d = d[d != 0.0]
    n = len(d)
    if n == 0:
        return WilcoxonResult(0, 0.0, 1.0, "exact")
    ranks = rankdata(np.abs(d))
    w_plus = float(ranks[d > 0].sum())
    w_minus = float(ranks[d < 0].sum())
    w = min(w_plus, w_minus)
    if n <= exact_limit:
        return WilcoxonResult(n, w, _exact_two_sided_p(ranks, w), "exact")
    return WilcoxonResult(n, w, _normal_approx_p(ranks, w), "normal_approx")


def cohort_report(cases: list[CaseMetrics]) -> CohortReport:
    """Mean and population std of Dice and ASSD over a cohort."""
    if not cases:
        raise ValueError("cohort_report requires at least one case")
    dices = np.array([c.dice for c in cases], dtype=np.float64)
    assds = np.array([c.assd_mm for c in cases], dtype=np.float64)
    return CohortReport(
        n_cases=len(cases),
        dice_mean=float(dices.mean()),
        dice_std=float(dices.std()),
        assd_mean=float(assds.mean()),
        assd_std=float(assds.std()),
        fallback_count=sum(c.assd_fallback_used for c in cases),
    )
