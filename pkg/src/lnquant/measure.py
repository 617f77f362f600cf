"""Lymph-node measurement: per-component shortest axial diameter,
enlargement classification, diameter histograms, and the small-component
prediction filter.

The shortest diameter of a component is measured slice-wise, RECIST style:
on each axial slice the in-plane long axis is the maximum pairwise distance
between voxel centres, the short axis is the extent perpendicular to it,
and both are widened by one in-plane voxel spacing to account for the voxel
footprint. The component's measurement is taken from the slice with the
largest short axis (lowest slice wins ties).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .morphology import ComponentSet, StructuringElement, binary_array, connected_components
from .volume import VolumeGrid


@dataclass(frozen=True)
class DiameterMeasurement:
    component_id: int
    shortest_diameter_mm: float
    slice_index: int
    long_axis_mm: float


@dataclass(frozen=True)
class EnlargementRule:
    """A node is enlarged when its short diameter is >= the threshold."""

    threshold_mm: float = 10.0

    def __post_init__(self):
        if self.threshold_mm <= 0:
            raise ValueError(f"threshold must be positive, got {self.threshold_mm}")


@dataclass(frozen=True)
class DatasetStats:
    """The per-dataset headline numbers: volumes, components, enlarged."""

    n_volumes: int
    n_components: int
    n_enlarged: int


_PAIR_BLOCK = 512  # row block for the pairwise distance scan


def _max_pair(pts: np.ndarray) -> tuple[int, int, float]:
    """First (row-major) index pair attaining the maximum pairwise distance."""
    n = len(pts)
    best = (-1.0, 0, 0)
    for start in range(0, n, _PAIR_BLOCK):
        block = pts[start : start + _PAIR_BLOCK]
        d2 = ((block[:, None, :] - pts[None, :, :]) ** 2).sum(axis=2)
        k = int(np.argmax(d2))
        i, j = divmod(k, n)
        val = float(d2[i, j])
        if val > best[0]:
            best = (val, start + i, j)
    return best[1], best[2], float(np.sqrt(best[0]))


def _slice_extents(pts: np.ndarray) -> tuple[float, float]:
    """(long, short) extents in mm of a 2D point set (no footprint term)."""
    if len(pts) == 1:
        return 0.0, 0.0
    i, j, long_extent = _max_pair(pts)
    if long_extent == 0.0:
        return 0.0, 0.0
    u = (pts[j] - pts[i]) / long_extent
    normal = np.array([-u[1], u[0]])
    proj = pts @ normal
    return long_extent, float(proj.max() - proj.min())


def shortest_diameter(voxels: np.ndarray, spacing, component_id: int = 0) -> DiameterMeasurement:
    """Measure a component given its (n, 3) voxel indices and grid spacing."""
    vox = np.asarray(voxels)
    if vox.size == 0:
        raise ValueError("cannot measure an empty component")
    _, sy, sx = (float(s) for s in spacing)
    footprint = 0.5 * (sy + sx)
    best = None
    for z in np.unique(vox[:, 0]):
        pts = vox[vox[:, 0] == z][:, 1:].astype(np.float64) * np.array([sy, sx])
        long_extent, short_extent = _slice_extents(pts)
        short = short_extent + footprint
        if best is None or short > best[0]:
            best = (short, int(z), long_extent + footprint)
    short, z, long_axis = best
    return DiameterMeasurement(component_id, short, z, long_axis)


def measure_components(cs: ComponentSet) -> list[DiameterMeasurement]:
    """Measure every component, filling shortest_diameter_mm in place."""
    measurements = []
    for comp in cs:
        m = shortest_diameter(comp.voxels, cs.spacing, comp.id)
        comp.shortest_diameter_mm = m.shortest_diameter_mm
        measurements.append(m)
    return measurements


def classify_enlarged(m: DiameterMeasurement, rule: EnlargementRule = EnlargementRule()) -> bool:
    return bool(m.shortest_diameter_mm >= rule.threshold_mm)


def postprocess_filter(
    pred: VolumeGrid,
    min_short_diameter_mm: float = 9.5,
    se: StructuringElement = StructuringElement(),
) -> VolumeGrid:
    """Erase predicted components whose short diameter is below the minimum.

    Components measuring exactly the minimum are kept. The output is always
    a subset of the input and the filter is idempotent.
    """
    arr = binary_array(pred)
    if not arr.any():
        return pred.with_data(np.zeros(pred.dims, dtype=np.uint8))
    keep = np.zeros(pred.dims, dtype=bool)
    for comp in connected_components(pred, se):
        m = shortest_diameter(comp.voxels, pred.spacing, comp.id)
        if m.shortest_diameter_mm >= min_short_diameter_mm:
            keep[tuple(comp.voxels.T)] = True
    return pred.with_data(keep.astype(np.uint8))


def bin_diameters(diameters, bin_width_mm: float) -> list[tuple[float, int]]:
    """Histogram over half-open bins [k*w, (k+1)*w), returned as (bin_lo,
    count) rows spanning the populated range contiguously."""
    if bin_width_mm <= 0:
        raise ValueError(f"bin width must be positive, got {bin_width_mm}")
    diameters = np.asarray(list(diameters), dtype=np.float64)
    if diameters.size == 0:
        return []
    ks = np.floor(diameters / bin_width_mm).astype(int)
    counts = np.bincount(ks - ks.min())
    return [(float((k + ks.min()) * bin_width_mm), int(c)) for k, c in enumerate(counts)]


def diameter_histogram(cs: ComponentSet, bin_width_mm: float) -> list[tuple[float, int]]:
    """Histogram of component short diameters; measures any component whose
    diameter has not been filled yet. An empty set gives an empty histogram."""
    diameters = []
    for comp in cs:
        if comp.shortest_diameter_mm is None:
            m = shortest_diameter(comp.voxels, cs.spacing, comp.id)
            comp.shortest_diameter_mm = m.shortest_diameter_mm
        diameters.append(comp.shortest_diameter_mm)
    return bin_diameters(diameters, bin_width_mm)


def dataset_ln_stats(
    volumes,
    rule: EnlargementRule = EnlargementRule(),
    se: StructuringElement = StructuringElement(),
) -> tuple[DatasetStats, list[DiameterMeasurement]]:
    """Aggregate component statistics over a dataset of label volumes.

    Returns the (volumes, components, enlarged) summary plus the flat list
    of all per-component measurements for downstream binning.
    """
    n_volumes = 0
    measurements: list[DiameterMeasurement] = []
    n_enlarged = 0
    for grid in volumes:
        n_volumes += 1
        cs = connected_components(grid, se)
        for m in measure_components(cs):
            measurements.append(m)
            if classify_enlarged(m, rule):
                n_enlarged += 1
    stats = DatasetStats(n_volumes, len(measurements), n_enlarged)
    return stats, measurements
