"""Geometry-aware 3D volumes: data model, resampling, intensity preparation.

Arrays are indexed (z, y, x) with z the axial slice direction, matching
thick-slice CT where the slice spacing dominates. Spacing and origin follow
the same (z, y, x) ordering in millimetres. ``origin`` is the physical
position of the centre of voxel (0, 0, 0).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

KIND_INTENSITY = "intensity"
KIND_LABEL = "label"
KIND_TRISTATE = "tristate"
VOLUME_KINDS = (KIND_INTENSITY, KIND_LABEL, KIND_TRISTATE)

Triple = tuple[float, float, float]


def as_triple(value, name: str) -> Triple:
    vals = tuple(float(v) for v in value)
    if len(vals) != 3:
        raise ValueError(f"{name} must have 3 components, got {len(vals)}")
    return vals


@dataclass(frozen=True)
class IntensityWindow:
    """Hounsfield clipping window; ``lo`` must be strictly below ``hi``."""

    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError(f"window lo must be < hi, got [{self.lo}, {self.hi}]")


@dataclass(frozen=True, eq=False)
class VolumeGrid:
    """A 3D scalar volume with physical spacing and origin.

    ``kind`` distinguishes Hounsfield intensity volumes from integer label
    maps and tri-state supervision maps. Intensity data is held as float32
    or float64; label/tristate data must be non-negative integers. The data
    array is copied on construction and frozen, so grids are safe to share
    across threads.
    """

    data: np.ndarray
    spacing: Triple
    origin: Triple = (0.0, 0.0, 0.0)
    kind: str = KIND_INTENSITY

    def __post_init__(self):
        if self.kind not in VOLUME_KINDS:
            raise ValueError(f"unknown volume kind {self.kind!r}")
        arr = np.asarray(self.data)
        if arr.ndim != 3:
            raise ValueError(f"volume data must be 3D, got shape {arr.shape}")
        if min(arr.shape) < 1:
            raise ValueError(f"volume dims must be >= 1, got {arr.shape}")
        if self.kind == KIND_INTENSITY:
            if arr.dtype not in (np.float32, np.float64):
                arr = arr.astype(np.float32)
            else:
                arr = arr.copy()
        else:
            if arr.dtype == bool:
                arr = arr.astype(np.uint8)
            elif not np.issubdtype(arr.dtype, np.integer):
                raise ValueError(f"{self.kind} volumes must hold integers, got {arr.dtype}")
            else:
                arr = arr.copy()
            if arr.size and int(arr.min()) < 0:
                raise ValueError(f"{self.kind} volumes must be non-negative")
        arr = np.ascontiguousarray(arr)
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)
        spacing = as_triple(self.spacing, "spacing")
        if min(spacing) <= 0:
            raise ValueError(f"spacing must be positive, got {spacing}")
        object.__setattr__(self, "spacing", spacing)
        object.__setattr__(self, "origin", as_triple(self.origin, "origin"))

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.data.shape

    @property
    def num_voxels(self) -> int:
        return int(self.data.size)

    @property
    def voxel_volume_mm3(self) -> float:
        sz, sy, sx = self.spacing
        return sz * sy * sx

    @property
    def physical_extent_mm(self) -> Triple:
        return tuple(n * s for n, s in zip(self.dims, self.spacing))

    def with_data(self, data: np.ndarray, kind: str | None = None) -> "VolumeGrid":
        """New grid with the same geometry but different payload."""
        return VolumeGrid(data, self.spacing, self.origin, kind or self.kind)

    def same_geometry(self, other: "VolumeGrid", tol: float = 1e-6) -> bool:
        return (
            self.dims == other.dims
            and all(abs(a - b) <= tol for a, b in zip(self.spacing, other.spacing))
            and all(abs(a - b) <= tol for a, b in zip(self.origin, other.origin))
        )


def grids_equal(a: VolumeGrid, b: VolumeGrid, meta_tol: float = 1e-6) -> bool:
    """Value equality: data exact, spacing/origin within ``meta_tol`` mm."""
    return a.kind == b.kind and a.same_geometry(b, meta_tol) and np.array_equal(a.data, b.data)


def resample(grid: VolumeGrid, target_spacing, mode: str = "nearest") -> VolumeGrid:
    """Resample a grid to a new spacing on a corner-aligned output lattice.

    Output dims are round(dims * spacing / target) with a minimum of 1 per
    axis, so the physical extent is preserved to within one voxel. Output
    voxel centres are placed so the physical corners of the input and output
    volumes coincide; sampling outside the input clamps to the edge voxel.
    ``mode`` is "nearest" (any kind) or "trilinear" (intensity only).
    """
    target = as_triple(target_spacing, "target_spacing")
    if min(target) <= 0:
        raise ValueError(f"target_spacing must be positive, got {target}")
    if mode not in ("nearest", "trilinear"):
        raise ValueError(f"unknown resampling mode {mode!r}")
    if mode == "trilinear" and grid.kind != KIND_INTENSITY:
        raise ValueError("trilinear resampling is only valid for intensity volumes")

    out_dims = tuple(
        max(1, int(np.floor(n * s / t + 0.5)))
        for n, s, t in zip(grid.dims, grid.spacing, target)
    )
    # Fractional source index of each output voxel centre, per axis.
    coords = [
        (np.arange(m, dtype=np.float64) + 0.5) * t / s - 0.5
        for m, t, s in zip(out_dims, target, grid.spacing)
    ]

    if mode == "nearest":
        idx = [
            np.clip(np.floor(u + 0.5).astype(np.intp), 0, n - 1)
            for u, n in zip(coords, grid.dims)
        ]
        data = grid.data[np.ix_(*idx)]
    else:
        lo = [np.floor(u).astype(np.intp) for u in coords]
        frac = [u - l for u, l in zip(coords, lo)]
        lo_c = [np.clip(l, 0, n - 1) for l, n in zip(lo, grid.dims)]
        hi_c = [np.clip(l + 1, 0, n - 1) for l, n in zip(lo, grid.dims)]
        acc = np.zeros(out_dims, dtype=np.float64)
        src = grid.data.astype(np.float64, copy=False)
        for cz, cy, cx in np.ndindex(2, 2, 2):
            wz = frac[0] if cz else 1.0 - frac[0]
            wy = frac[1] if cy else 1.0 - frac[1]
            wx = frac[2] if cx else 1.0 - frac[2]
            w = wz[:, None, None] * wy[None, :, None] * wx[None, None, :]
            iz = hi_c[0] if cz else lo_c[0]
            iy = hi_c[1] if cy else lo_c[1]
            ix = hi_c[2] if cx else lo_c[2]
            acc += w * src[np.ix_(iz, iy, ix)]
        data = acc.astype(grid.data.dtype)

    origin = tuple(
        o - 0.5 * s + 0.5 * t for o, s, t in zip(grid.origin, grid.spacing, target)
    )
    return VolumeGrid(data, target, origin, grid.kind)


def clip_and_standardize(grid: VolumeGrid, window: IntensityWindow) -> VolumeGrid:
    """Clamp intensities to the window, then shift/scale to mean 0, std 1.

    Statistics are computed per volume over all voxels after clipping, with
    the population std formula. A constant volume maps to all zeros.
    """
    if grid.kind != KIND_INTENSITY:
        raise ValueError("clip_and_standardize requires an intensity volume")
    clipped = np.clip(grid.data.astype(np.float64), window.lo, window.hi)
    mean = float(clipped.mean())
    std = float(clipped.std())
    if std == 0.0:
        out = np.zeros(grid.dims, dtype=np.float64)
    else:
        out = (clipped - mean) / std
    return grid.with_data(out)
