"""Per-case pipeline steps behind the CLI: preprocessing, strategy export,
and evaluation. Case directories hold image.nii.gz / weak.nii.gz plus
optional anatomy.nii.gz and gt.nii.gz; every step writes its outputs under
the case's derived/ subdirectory.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import PipelineConfig
from .fileio import read_volume, write_volume
from .measure import postprocess_filter
from .metrics import CaseMetrics, OverlapBinCurve, assd, dice, overlap_curves
from .morphology import bounding_box_of, crop
from .volume import KIND_LABEL, VolumeGrid, clip_and_standardize, resample
from .weak_labels import (
    AnnotationState,
    export_training_pair,
    from_weak_labels,
    strategy_instance_coating,
    strategy_loss_masking,
    strategy_noisy_label,
    strategy_pseudo_labeling,
    voxel_stats,
)

CASE_IMAGE = "image.nii.gz"
CASE_WEAK = "weak.nii.gz"
CASE_GT = "gt.nii.gz"
CASE_ANATOMY = "anatomy.nii.gz"
DERIVED_DIR = "derived"

STRATEGIES = ("noisy", "mask", "coat", "pseudo")

_VOLUME_SUFFIXES = (".nii", ".nii.gz", ".json")


class InputError(Exception):
    """A problem with the inputs handed to a command (exit code 2)."""


class StageError(Exception):
    """A pipeline stage failed; carries the stage name and original cause."""

    def __init__(self, stage: str, case_id: str, cause: Exception):
        super().__init__(f"case {case_id!r}, stage {stage!r}: {cause}")
        self.stage = stage
        self.case_id = case_id
        self.cause = cause


@dataclass(frozen=True)
class StageStats:
    stage: str
    total_voxels: int
    labeled_voxels: int
    ratio_percent: float


def _require(path: Path, what: str) -> Path:
    if not path.exists():
        raise InputError(f"missing {what}: {path}")
    return path


def _stats_row(stage: str, state: AnnotationState) -> StageStats:
    vs = voxel_stats(state)
    return StageStats(stage, vs.total_voxels, vs.labeled_voxels, vs.ratio_percent)


def preprocess_case(case_dir, cfg: PipelineConfig) -> list[StageStats]:
    """Resample, crop to the lung bounding box, pseudo-label statistics, and
    intensity standardisation; derived volumes land in case/derived/."""
    case_dir = Path(case_dir)
    case_id = case_dir.name
    stats: list[StageStats] = []

    def stage(name, fn):
        try:
            return fn()
        except (InputError, StageError):
            raise
        except Exception as exc:
            raise StageError(name, case_id, exc) from exc

    image = stage("read", lambda: read_volume(_require(case_dir / CASE_IMAGE, "case image")))
    weak = stage("read", lambda: read_volume(_require(case_dir / CASE_WEAK, "weak labels")))
    anatomy = gt = None
    if (case_dir / CASE_ANATOMY).exists():
        anatomy = stage("read", lambda: read_volume(case_dir / CASE_ANATOMY))
    if (case_dir / CASE_GT).exists():
        gt = stage("read", lambda: read_volume(case_dir / CASE_GT))

    def do_resample():
        img = resample(image, cfg.target_spacing, "trilinear")
        wk = resample(weak, cfg.target_spacing, "nearest")
        an = resample(anatomy, cfg.target_spacing, "nearest") if anatomy else None
        g = resample(gt, cfg.target_spacing, "nearest") if gt else None
        return img, wk, an, g

    image, weak, anatomy, gt = stage("resample", do_resample)
    stats.append(_stats_row("raw", from_weak_labels(weak)))

    if anatomy is not None:
        def do_crop():
            lung = VolumeGrid(
                np.isin(anatomy.data, cfg.lung_labels).astype(np.uint8),
                anatomy.spacing, anatomy.origin, KIND_LABEL,
            )
            box = bounding_box_of(lung, cfg.crop_margin_mm)
            return tuple(crop(g, box) if g is not None else None for g in (image, weak, anatomy, gt))

        image, weak, anatomy, gt = stage("roi_crop", do_crop)
        stats.append(_stats_row("roi_crop", from_weak_labels(weak)))

        def do_pseudo():
            return strategy_pseudo_labeling(from_weak_labels(weak), anatomy)

        stats.append(_stats_row("pseudo_label", stage("pseudo_label", do_pseudo)))

    image = stage("standardize", lambda: clip_and_standardize(image, cfg.window()))

    derived = case_dir / DERIVED_DIR
    derived.mkdir(exist_ok=True)

    def do_write():
        write_volume(image, derived / CASE_IMAGE)
        write_volume(weak, derived / CASE_WEAK)
        if anatomy is not None:
            write_volume(anatomy, derived / CASE_ANATOMY)
        if gt is not None:
            write_volume(gt, derived / CASE_GT)

    stage("write", do_write)
    return stats


def run_strategy(case_dir, strategy: str, cfg: PipelineConfig) -> tuple[Path, StageStats]:
    """Apply one weak-annotation strategy to a preprocessed case and write
    the target / loss-mask training pair plus a provenance record."""
    if strategy not in STRATEGIES:
        raise InputError(f"unknown strategy {strategy!r}, expected one of {STRATEGIES}")
    case_dir = Path(case_dir)
    derived = case_dir / DERIVED_DIR
    if not derived.is_dir():
        raise InputError(f"case {case_dir.name!r} has no derived/ directory; run preprocess first")
    weak = read_volume(_require(derived / CASE_WEAK, "preprocessed weak labels"))
    state = from_weak_labels(weak)
    se = cfg.structuring_element()

    if strategy == "noisy":
        state = strategy_noisy_label(state)
    elif strategy == "mask":
        state = strategy_loss_masking(state)
    elif strategy == "coat":
        state = strategy_instance_coating(state, cfg.coating_margin_voxels, se)
    else:
        anatomy_path = derived / CASE_ANATOMY
        if not anatomy_path.exists():
            raise InputError(f"strategy 'pseudo' needs {CASE_ANATOMY} in {derived}")
        state = strategy_pseudo_labeling(state, read_volume(anatomy_path))

    target, loss_mask = export_training_pair(state)
    out_dir = derived / f"strategy_{strategy}"
    out_dir.mkdir(exist_ok=True)
    write_volume(target, out_dir / "target.nii.gz")
    write_volume(loss_mask, out_dir / "loss_mask.nii.gz")
    row = _stats_row(strategy, state)

    provenance = {
        "case": case_dir.name,
        "strategy": strategy,
        "coating_margin_voxels": cfg.coating_margin_voxels if strategy == "coat" else None,
        "connectivity": cfg.connectivity if strategy == "coat" else None,
        "total_voxels": row.total_voxels,
        "labeled_voxels": row.labeled_voxels,
        "ratio_percent": row.ratio_percent,
    }
    (out_dir / "provenance.json").write_text(json.dumps(provenance, indent=2) + "\n")
    return out_dir, row


def evaluate_case(
    case_id: str,
    pred_path,
    gt_path,
    cfg: PipelineConfig,
    postprocess_first: bool = False,
) -> tuple[CaseMetrics, OverlapBinCurve, OverlapBinCurve]:
    pred = read_volume(pred_path)
    gt = read_volume(gt_path)
    if pred.dims != gt.dims:
        raise InputError(
            f"case {case_id!r}: prediction dims {pred.dims} do not match ground truth {gt.dims}"
        )
    se = cfg.structuring_element()
    if postprocess_first:
        pred = postprocess_filter(pred, cfg.filter_min_diameter_mm, se)
    d = dice(pred, gt)
    a, fallback = assd(pred, gt)
    gt_curve, pred_curve = overlap_curves(pred, gt, cfg.bin_width_mm, se)
    return CaseMetrics(case_id, d, a, fallback), gt_curve, pred_curve


def collect_case_volumes(root, preferred_name: str) -> dict[str, Path]:
    """Map case ids to volume paths.

    Supports two layouts: a directory of case subdirectories each holding
    ``preferred_name`` (directly or under derived/), or a flat directory of
    volume files whose stem is the case id.
    """
    root = Path(root)
    if not root.is_dir():
        raise InputError(f"not a directory: {root}")
    cases: dict[str, Path] = {}
    for sub in sorted(p for p in root.iterdir() if p.is_dir()):
        for candidate in (sub / preferred_name, sub / DERIVED_DIR / preferred_name):
            if candidate.exists():
                cases[sub.name] = candidate
                break
    if cases:
        return cases
    for f in sorted(root.iterdir()):
        if not f.is_file():
            continue
        name = f.name.lower()
        if name.endswith(".raw") or not name.endswith(_VOLUME_SUFFIXES):
            continue
        stem = f.name
        for suffix in (".nii.gz", ".nii", ".json"):
            if stem.lower().endswith(suffix):
                stem = stem[: -len(suffix)]
                break
        cases[stem] = f
    if not cases:
        raise InputError(f"no case volumes found under {root}")
    return cases
