"""Weak-annotation handling: tri-state supervision maps and the strategies
that turn partially annotated volumes into training targets.

Every voxel is UNKNOWN, BACKGROUND, or FOREGROUND. Weak labels mark only
some foreground instances, so everything unannotated starts as UNKNOWN;
each strategy then decides what to do with the UNKNOWN voxels. No strategy
ever touches a FOREGROUND voxel, and supervision only ever grows.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .morphology import StructuringElement, binary_array, dilate
from .volume import KIND_LABEL, KIND_TRISTATE, Triple, VolumeGrid, as_triple

UNKNOWN = 0
BACKGROUND = 1
FOREGROUND = 2


@dataclass(frozen=True, eq=False)
class AnnotationState:
    """Per-voxel supervision map with the geometry of its source volume."""

    state: np.ndarray  # uint8 codes, shape (nz, ny, nx)
    spacing: Triple
    origin: Triple = (0.0, 0.0, 0.0)

    def __post_init__(self):
        arr = np.asarray(self.state)
        if arr.ndim != 3:
            raise ValueError(f"state must be 3D, got shape {arr.shape}")
        if not np.issubdtype(arr.dtype, np.integer):
            arr = arr.astype(np.uint8)
        if arr.size and (arr.min() < UNKNOWN or arr.max() > FOREGROUND):
            raise ValueError("state codes must be 0 (unknown), 1 (background), or 2 (foreground)")
        arr = np.ascontiguousarray(arr.astype(np.uint8))
        arr.setflags(write=False)
        object.__setattr__(self, "state", arr)
        object.__setattr__(self, "spacing", as_triple(self.spacing, "spacing"))
        object.__setattr__(self, "origin", as_triple(self.origin, "origin"))

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.state.shape

    def foreground_mask(self) -> np.ndarray:
        return self.state == FOREGROUND

    def loss_mask(self) -> np.ndarray:
        """Supervision mask: 1 wherever the voxel is not UNKNOWN."""
        return self.state != UNKNOWN

    def with_state(self, state: np.ndarray) -> "AnnotationState":
        return AnnotationState(state, self.spacing, self.origin)

    def to_grid(self) -> VolumeGrid:
        return VolumeGrid(self.state, self.spacing, self.origin, KIND_TRISTATE)


@dataclass(frozen=True)
class VoxelStats:
    total_voxels: int
    labeled_voxels: int

    @property
    def ratio_percent(self) -> float:
        return 100.0 * self.labeled_voxels / self.total_voxels


def from_weak_labels(weak: VolumeGrid) -> AnnotationState:
    """Lift a weak binary foreground mask into a supervision map: annotated
    voxels become FOREGROUND, everything else is UNKNOWN."""
    fg = binary_array(weak)
    state = np.where(fg, np.uint8(FOREGROUND), np.uint8(UNKNOWN))
    return AnnotationState(state, weak.spacing, weak.origin)


def state_from_grid(grid: VolumeGrid) -> AnnotationState:
    if grid.kind != KIND_TRISTATE:
        raise ValueError(f"expected a tristate volume, got kind {grid.kind!r}")
    return AnnotationState(grid.data, grid.spacing, grid.origin)


def strategy_noisy_label(state: AnnotationState) -> AnnotationState:
    """Treat every unannotated voxel as background (deliberate label noise)."""
    out = state.state.copy()
    out[out == UNKNOWN] = BACKGROUND
    return state.with_state(out)


def strategy_loss_masking(state: AnnotationState) -> AnnotationState:
    """Keep unannotated voxels out of the training signal.

    The state codes are untouched; the effect lives entirely in the exported
    loss mask, which is zero on UNKNOWN voxels (see export_training_pair).
    """
    return state.with_state(state.state)


def strategy_instance_coating(
    state: AnnotationState,
    margin_voxels: int = 1,
    se: StructuringElement = StructuringElement(),
) -> AnnotationState:
    """Wrap each annotated instance in a background hull.

    The hull is the ``margin_voxels``-fold dilation of the foreground minus
    the foreground itself; hull voxels that are still UNKNOWN become
    BACKGROUND. The margin is counted in voxels, so anisotropic spacing
    yields an anisotropic physical shell.
    """
    if margin_voxels < 1:
        raise ValueError(f"margin_voxels must be >= 1, got {margin_voxels}")
    fg = state.foreground_mask()
    if not fg.any():
        return state.with_state(state.state)
    fg_grid = VolumeGrid(fg.astype(np.uint8), state.spacing, state.origin, KIND_LABEL)
    hull = binary_array(dilate(fg_grid, se, margin_voxels)) & ~fg
    out = state.state.copy()
    out[hull & (out == UNKNOWN)] = BACKGROUND
    return state.with_state(out)


def strategy_pseudo_labeling(state: AnnotationState, anatomy: VolumeGrid) -> AnnotationState:
    """Mark voxels inside known anatomical structures as background.

    Any voxel with a positive anatomy label that is still UNKNOWN becomes
    BACKGROUND. Expert-annotated FOREGROUND is never overwritten, even where
    the anatomy map claims the voxel.
    """
    if anatomy.kind != KIND_LABEL:
        raise ValueError(f"anatomy must be a label volume, got kind {anatomy.kind!r}")
    if anatomy.dims != state.dims:
        raise ValueError(f"anatomy dims {anatomy.dims} do not match state dims {state.dims}")
    out = state.state.copy()
    out[(anatomy.data > 0) & (out == UNKNOWN)] = BACKGROUND
    return state.with_state(out)


def voxel_stats(state: AnnotationState) -> VoxelStats:
    labeled = int(np.count_nonzero(state.state != UNKNOWN))
    return VoxelStats(total_voxels=int(state.state.size), labeled_voxels=labeled)


def export_training_pair(state: AnnotationState) -> tuple[VolumeGrid, VolumeGrid]:
    """Binary (target, loss_mask) volumes for handing off to a trainer.

    target is 1 exactly on FOREGROUND; loss_mask is 1 wherever the voxel is
    supervised (not UNKNOWN). UNKNOWN voxels come out as 0-target, 0-mask.
    """
    target = state.foreground_mask().astype(np.uint8)
    mask = state.loss_mask().astype(np.uint8)
    geometry = dict(spacing=state.spacing, origin=state.origin, kind=KIND_LABEL)
    return VolumeGrid(target, **geometry), VolumeGrid(mask, **geometry)
