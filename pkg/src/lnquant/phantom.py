"""Seeded synthetic phantoms: ellipsoid nodes and box organs on a CT-like
background. Phantoms stand in for real cases in tests and demos; every
volume is a pure function of the spec, so identical specs give identical
bytes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .volume import KIND_INTENSITY, KIND_LABEL, Triple, VolumeGrid, as_triple


@dataclass(frozen=True)
class NodeSpec:
    """One ellipsoidal node: centre and radii in mm, (z, y, x) order."""

    center_mm: Triple
    radii_mm: Triple
    annotated: bool = True
    hu: float = 60.0


@dataclass(frozen=True)
class OrganSpec:
    """One axis-aligned organ box in mm with an anatomy label id."""

    lo_mm: Triple
    hi_mm: Triple
    label: int
    hu: float = 40.0


@dataclass(frozen=True)
class PhantomSpec:
    dims: tuple[int, int, int]
    spacing: Triple
    seed: int
    nodes: tuple[NodeSpec, ...] = ()
    organs: tuple[OrganSpec, ...] = ()
    origin: Triple = (0.0, 0.0, 0.0)
    noise_std: float = 0.0
    background_hu: float = -800.0

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        if len(dims) != 3 or min(dims) < 1:
            raise ValueError(f"dims must be 3 positive integers, got {self.dims}")
        object.__setattr__(self, "dims", dims)
        spacing = as_triple(self.spacing, "spacing")
        if min(spacing) <= 0:
            raise ValueError(f"spacing must be positive, got {spacing}")
        object.__setattr__(self, "spacing", spacing)
        object.__setattr__(self, "origin", as_triple(self.origin, "origin"))
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(self, "organs", tuple(self.organs))
        lo = tuple(o - 0.5 * s for o, s in zip(self.origin, spacing))
        hi = tuple(o + (d - 0.5) * s for o, d, s in zip(self.origin, dims, spacing))
        for node in self.nodes:
            c = as_triple(node.center_mm, "node center")
            if any(v < l or v > h for v, l, h in zip(c, lo, hi)):
                raise ValueError(f"node centre {c} lies outside the volume extent")
            if min(node.radii_mm) <= 0:
                raise ValueError(f"node radii must be positive, got {node.radii_mm}")

    def to_dict(self) -> dict:
        return {
            "dims": list(self.dims),
            "spacing": list(self.spacing),
            "origin": list(self.origin),
            "seed": self.seed,
            "noise_std": self.noise_std,
            "background_hu": self.background_hu,
            "nodes": [
                {
                    "center_mm": list(n.center_mm),
                    "radii_mm": list(n.radii_mm),
                    "annotated": n.annotated,
                    "hu": n.hu,
                }
                for n in self.nodes
            ],
            "organs": [
                {"lo_mm": list(o.lo_mm), "hi_mm": list(o.hi_mm), "label": o.label, "hu": o.hu}
                for o in self.organs
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PhantomSpec":
        nodes = tuple(
            NodeSpec(
                tuple(n["center_mm"]),
                tuple(n["radii_mm"]),
                bool(n.get("annotated", True)),
                float(n.get("hu", 60.0)),
            )
            for n in d.get("nodes", [])
        )
        organs = tuple(
            OrganSpec(tuple(o["lo_mm"]), tuple(o["hi_mm"]), int(o["label"]), float(o.get("hu", 40.0)))
            for o in d.get("organs", [])
        )
        return cls(
            dims=tuple(d["dims"]),
            spacing=tuple(d["spacing"]),
            seed=int(d["seed"]),
            nodes=nodes,
            organs=organs,
            origin=tuple(d.get("origin", (0.0, 0.0, 0.0))),
            noise_std=float(d.get("noise_std", 0.0)),
            background_hu=float(d.get("background_hu", -800.0)),
        )

    @classmethod
    def from_json_file(cls, path) -> "PhantomSpec":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def to_json_file(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    def with_seed(self, seed: int) -> "PhantomSpec":
        return PhantomSpec(
            self.dims, self.spacing, seed, self.nodes, self.organs,
            self.origin, self.noise_std, self.background_hu,
        )


@dataclass(frozen=True)
class PhantomCase:
    image: VolumeGrid     # CT-like intensities in HU
    gt: VolumeGrid        # all nodes
    weak: VolumeGrid      # annotated nodes only
    anatomy: VolumeGrid   # multi-label organ map
    hidden: VolumeGrid = field(repr=False, default=None)  # gt minus weak


def _axis_coords(spec: PhantomSpec):
    return [
        spec.origin[ax] + np.arange(spec.dims[ax], dtype=np.float64) * spec.spacing[ax]
        for ax in range(3)
    ]


def _ellipsoid_mask(spec: PhantomSpec, node: NodeSpec) -> np.ndarray:
    zc, yc, xc = _axis_coords(spec)
    cz, cy, cx = node.center_mm
    rz, ry, rx = node.radii_mm
    q = (
        ((zc - cz) / rz)[:, None, None] ** 2
        + ((yc - cy) / ry)[None, :, None] ** 2
        + ((xc - cx) / rx)[None, None, :] ** 2
    )
    return q <= 1.0


def _box_mask(spec: PhantomSpec, lo_mm, hi_mm) -> np.ndarray:
    zc, yc, xc = _axis_coords(spec)
    inz = (zc >= lo_mm[0]) & (zc <= hi_mm[0])
    iny = (yc >= lo_mm[1]) & (yc <= hi_mm[1])
    inx = (xc >= lo_mm[2]) & (xc <= hi_mm[2])
    return inz[:, None, None] & iny[None, :, None] & inx[None, None, :]


def generate_phantom(spec: PhantomSpec) -> PhantomCase:
    """Render the four case volumes (image, full GT, weak labels, anatomy)."""
    image = np.full(spec.dims, spec.background_hu, dtype=np.float64)
    anatomy = np.zeros(spec.dims, dtype=np.int16)
    gt = np.zeros(spec.dims, dtype=np.uint8)
    weak = np.zeros(spec.dims, dtype=np.uint8)
    hidden = np.zeros(spec.dims, dtype=np.uint8)

    for organ in spec.organs:
        mask = _box_mask(spec, organ.lo_mm, organ.hi_mm)
        image[mask] = organ.hu
        anatomy[mask] = organ.label
    for node in spec.nodes:
        mask = _ellipsoid_mask(spec, node)
        image[mask] = node.hu
        gt[mask] = 1
        if node.annotated:
            weak[mask] = 1
        else:
            hidden[mask] = 1

    if spec.noise_std > 0:
        rng = np.random.default_rng(spec.seed)
        image += rng.normal(0.0, spec.noise_std, spec.dims)

    geometry = dict(spacing=spec.spacing, origin=spec.origin)
    return PhantomCase(
        image=VolumeGrid(image.astype(np.float32), kind=KIND_INTENSITY, **geometry),
        gt=VolumeGrid(gt, kind=KIND_LABEL, **geometry),
        weak=VolumeGrid(weak, kind=KIND_LABEL, **geometry),
        anatomy=VolumeGrid(anatomy, kind=KIND_LABEL, **geometry),
        hidden=VolumeGrid(hidden, kind=KIND_LABEL, **geometry),
    )
