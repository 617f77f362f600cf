"""lnquant: volumetric toolkit for weakly annotated lymph node CT.

Covers the non-neural parts of a weakly supervised segmentation workflow:
volume I/O and resampling, weak-annotation strategies with loss masks,
RECIST-style shortest-diameter measurement, Dice/ASSD evaluation with
diameter-binned overlap curves, paired Wilcoxon testing, and a seeded
phantom generator for end-to-end checks.
"""

from .config import PipelineConfig
from .fileio import VolumeFormatError, read_volume, write_volume
from .measure import (
    DatasetStats,
    DiameterMeasurement,
    EnlargementRule,
    bin_diameters,
    classify_enlarged,
    dataset_ln_stats,
    diameter_histogram,
    measure_components,
    postprocess_filter,
    shortest_diameter,
)
from .metrics import (
    CaseMetrics,
    CohortReport,
    OverlapBin,
    OverlapBinCurve,
    WilcoxonResult,
    assd,
    cohort_report,
    dice,
    overlap_curves,
    pool_overlap_curves,
    wilcoxon_signed_rank,
)
from .morphology import (
    BoundingBox,
    Component,
    ComponentSet,
    EmptyMaskError,
    EmptySurfaceError,
    StructuringElement,
    bounding_box_of,
    connected_components,
    crop,
    dilate,
    directed_surface_distances,
    surface_voxels,
)
from .phantom import NodeSpec, OrganSpec, PhantomCase, PhantomSpec, generate_phantom
from .volume import (
    KIND_INTENSITY,
    KIND_LABEL,
    KIND_TRISTATE,
    IntensityWindow,
    VolumeGrid,
    clip_and_standardize,
    grids_equal,
    resample,
)
from .weak_labels import (
    BACKGROUND,
    FOREGROUND,
    UNKNOWN,
    AnnotationState,
    VoxelStats,
    export_training_pair,
    from_weak_labels,
    state_from_grid,
    strategy_instance_coating,
    strategy_loss_masking,
    strategy_noisy_label,
    strategy_pseudo_labeling,
    voxel_stats,
)

__version__ = "0.1.0"
