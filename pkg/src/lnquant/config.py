"""Pipeline configuration: a single record of every tunable constant, with
defaults matching the reference processing protocol. Values load from a
JSON file and can be overridden per-flag on the command line.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, fields
from pathlib import Path

from .measure import EnlargementRule
from .morphology import StructuringElement
from .volume import IntensityWindow, Triple, as_triple


@dataclass(frozen=True)
class PipelineConfig:
    target_spacing: Triple = (3.0, 0.93, 0.93)
    intensity_window: tuple[float, float] = (-150.0, 350.0)
    coating_margin_voxels: int = 1
    connectivity: int = 26
    filter_min_diameter_mm: float = 9.5
    bin_width_mm: float = 2.5
    enlargement_threshold_mm: float = 10.0
    # Anatomy labels treated as lung for the ROI crop (left/right lobes).
    lung_labels: tuple[int, ...] = (10, 11, 12, 13, 14)
    crop_margin_mm: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "target_spacing", as_triple(self.target_spacing, "target_spacing"))
        window = tuple(float(v) for v in self.intensity_window)
        if len(window) != 2 or not window[0] < window[1]:
            raise ValueError(f"intensity_window must be (lo, hi) with lo < hi, got {window}")
        object.__setattr__(self, "intensity_window", window)
        object.__setattr__(self, "lung_labels", tuple(int(v) for v in self.lung_labels))
        if min(self.target_spacing) <= 0:
            raise ValueError(f"target_spacing must be positive, got {self.target_spacing}")
        if self.coating_margin_voxels < 1:
            raise ValueError("coating_margin_voxels must be >= 1")
        if self.filter_min_diameter_mm <= 0 or self.bin_width_mm <= 0 or self.enlargement_threshold_mm <= 0:
            raise ValueError("thresholds and bin width must be positive")
        if self.crop_margin_mm < 0:
            raise ValueError("crop_margin_mm must be >= 0")
        StructuringElement(self.connectivity)  # validates the value

    def window(self) -> IntensityWindow:
        return IntensityWindow(*self.intensity_window)

    def structuring_element(self) -> StructuringElement:
        return StructuringElement(self.connectivity)

    def enlargement_rule(self) -> EnlargementRule:
        return EnlargementRule(self.enlargement_threshold_mm)

    def to_dict(self) -> dict:
        return {
            "target_spacing": list(self.target_spacing),
            "intensity_window": list(self.intensity_window),
            "coating_margin_voxels": self.coating_margin_voxels,
            "connectivity": self.connectivity,
            "filter_min_diameter_mm": self.filter_min_diameter_mm,
            "bin_width_mm": self.bin_width_mm,
            "enlargement_threshold_mm": self.enlargement_threshold_mm,
            "lung_labels": list(self.lung_labels),
            "crop_margin_mm": self.crop_margin_mm,
        }

    @classmethod
    def load(cls, path=None, overrides: dict | None = None) -> "PipelineConfig":
        """Config from an optional JSON file plus non-None overrides."""
        values: dict = {}
        if path is not None:
            raw = json.loads(Path(path).read_text())
            known = {f.name for f in fields(cls)}
            unknown = set(raw) - known
            if unknown:
                raise ValueError(f"unknown config keys: {sorted(unknown)}")
            values.update(raw)
        for key, val in (overrides or {}).items():
            if val is not None:
                values[key] = val
        return cls(**values)
