"""Volume file I/O.

Two on-disk formats are supported, dispatched on file extension:

* ``.nii`` / ``.nii.gz`` -- the single-file medical volume format with a
  348-byte little-endian header, optionally gzip-compressed. Datatypes
  uint8, int16, and float32 are supported; orientation must be axis-aligned.
* ``.json`` -- a raw binary payload plus a JSON sidecar. The sidecar carries
  dims / spacing / origin / kind / dtype and names the payload file that
  sits next to it. This is the toolkit's canonical test format; the schema
  is documented in the README and payloads round-trip bit-exactly.

All writes are deterministic: gzip streams carry a zero mtime so identical
grids produce identical bytes.
"""

from __future__ import annotations

import gzip
import json
import struct
from pathlib import Path

import numpy as np

from .volume import KIND_INTENSITY, KIND_LABEL, VOLUME_KINDS, VolumeGrid


class VolumeFormatError(ValueError):
    """Raised for unreadable, unsupported, or inconsistent volume files."""


_NIFTI_HEADER_BYTES = 348
_NIFTI_VOX_OFFSET = 352
_NIFTI_DTYPES = {2: np.uint8, 4: np.int16, 16: np.float32}
_NIFTI_CODES = {np.dtype(np.uint8): (2, 8), np.dtype(np.int16): (4, 16), np.dtype(np.float32): (16, 32)}

RAW_FORMAT_TAG = "lnquant-raw-v1"
_RAW_DTYPES = ("uint8", "uint16", "int16", "int32", "int64", "float32", "float64")


def read_volume(path) -> VolumeGrid:
    """Read a volume file, normalising to the internal (z, y, x) convention."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"volume file not found: {path}")
    name = path.name.lower()
    if name.endswith(".json"):
        return _read_sidecar(path)
    if name.endswith(".nii") or name.endswith(".nii.gz"):
        return _read_nifti(path)
    raise VolumeFormatError(f"unsupported volume format: {path.name}")


def write_volume(grid: VolumeGrid, path) -> None:
    """Write a grid; the format is chosen by the path's extension."""
    path = Path(path)
    if not path.parent.is_dir():
        raise FileNotFoundError(f"parent directory does not exist: {path.parent}")
    name = path.name.lower()
    if name.endswith(".json"):
        _write_sidecar(grid, path)
    elif name.endswith(".nii") or name.endswith(".nii.gz"):
        _write_nifti(grid, path)
    else:
        raise VolumeFormatError(f"unsupported volume format: {path.name}")


# -- single-file medical format ------------------------------------------------


def _read_nifti(path: Path) -> VolumeGrid:
    blob = path.read_bytes()
    if blob[:2] == b"\x1f\x8b":
        try:
            blob = gzip.decompress(blob)
        except OSError as exc:
            raise VolumeFormatError(f"corrupt gzip stream in {path.name}: {exc}") from exc
    if len(blob) < _NIFTI_HEADER_BYTES:
        raise VolumeFormatError(f"{path.name}: truncated header")
    hdr = blob[:_NIFTI_HEADER_BYTES]

    (sizeof_hdr,) = struct.unpack_from("<i", hdr, 0)
    if sizeof_hdr != _NIFTI_HEADER_BYTES:
        raise VolumeFormatError(f"{path.name}: bad or byte-swapped header (sizeof={sizeof_hdr})")
    magic = hdr[344:348]
    if magic not in (b"n+1\x00", b"ni1\x00"):
        raise VolumeFormatError(f"{path.name}: unrecognised magic {magic!r}")
    if magic == b"ni1\x00":
        raise VolumeFormatError(f"{path.name}: two-file header/image pairs are not supported")

    dim = struct.unpack_from("<8h", hdr, 40)
    if dim[0] < 3 or any(d != 1 for d in dim[4 : dim[0] + 1]):
        raise VolumeFormatError(f"{path.name}: only 3D volumes are supported (dim={dim[: dim[0] + 1]})")
    nx, ny, nz = dim[1], dim[2], dim[3]
    if min(nx, ny, nz) < 1:
        raise VolumeFormatError(f"{path.name}: non-positive dimensions {dim[1:4]}")

    datatype, bitpix = struct.unpack_from("<2h", hdr, 70)
    if datatype not in _NIFTI_DTYPES:
        raise VolumeFormatError(f"{path.name}: unsupported datatype code {datatype}")
    dtype = np.dtype(_NIFTI_DTYPES[datatype]).newbyteorder("<")
    if bitpix != dtype.itemsize * 8:
        raise VolumeFormatError(f"{path.name}: bitpix {bitpix} inconsistent with datatype {datatype}")

    pixdim = struct.unpack_from("<8f", hdr, 76)
    spacing = (float(pixdim[3]), float(pixdim[2]), float(pixdim[1]))  # (sz, sy, sx)
    if min(spacing) <= 0:
        raise VolumeFormatError(f"{path.name}: non-positive voxel spacing {spacing}")

    (vox_offset,) = struct.unpack_from("<f", hdr, 108)
    scl_slope, scl_inter = struct.unpack_from("<2f", hdr, 112)
    qform_code, sform_code = struct.unpack_from("<2h", hdr, 252)
    origin = (0.0, 0.0, 0.0)
    if sform_code > 0:
        srow = struct.unpack_from("<12f", hdr, 280)
        off_diag = (srow[1], srow[2], srow[4], srow[6], srow[8], srow[9])
        if any(abs(v) > 1e-5 for v in off_diag) or min(srow[0], srow[5], srow[10]) <= 0:
            raise VolumeFormatError(f"{path.name}: only axis-aligned orientations are supported")
        origin = (float(srow[11]), float(srow[7]), float(srow[3]))
    elif qform_code > 0:
        quat = struct.unpack_from("<3f", hdr, 256)
        if any(abs(v) > 1e-5 for v in quat):
            raise VolumeFormatError(f"{path.name}: only axis-aligned orientations are supported")
        qoff = struct.unpack_from("<3f", hdr, 268)
        origin = (float(qoff[2]), float(qoff[1]), float(qoff[0]))

    offset = int(vox_offset) if vox_offset >= _NIFTI_HEADER_BYTES else _NIFTI_VOX_OFFSET
    count = nx * ny * nz
    payload = blob[offset : offset + count * dtype.itemsize]
    if len(payload) != count * dtype.itemsize:
        raise VolumeFormatError(
            f"{path.name}: payload holds {len(payload)} bytes, header expects {count * dtype.itemsize}"
        )
    # On-disk order is x-fastest, which is exactly C-order for (nz, ny, nx).
    arr = np.frombuffer(payload, dtype=dtype, count=count).reshape(nz, ny, nx)

    intent_name = hdr[328:344].split(b"\x00", 1)[0].decode("ascii", "replace")
    if intent_name in VOLUME_KINDS:
        kind = intent_name
    else:
        kind = KIND_INTENSITY if np.issubdtype(arr.dtype, np.floating) else KIND_LABEL

    if kind == KIND_INTENSITY and scl_slope not in (0.0, 1.0):
        arr = arr.astype(np.float32) * scl_slope + scl_inter
    elif kind == KIND_INTENSITY and scl_inter != 0.0:
        arr = arr.astype(np.float32) + scl_inter
    return VolumeGrid(arr, spacing, origin, kind)


def _nifti_payload_dtype(grid: VolumeGrid) -> np.dtype:
    if grid.kind == KIND_INTENSITY:
        return np.dtype(np.float32)
    hi = int(grid.data.max()) if grid.data.size else 0
    if hi <= np.iinfo(np.uint8).max:
        return np.dtype(np.uint8)
    if hi <= np.iinfo(np.int16).max:
        return np.dtype(np.int16)
    raise VolumeFormatError(f"label value {hi} exceeds the supported integer datatypes")


def _write_nifti(grid: VolumeGrid, path: Path) -> None:
    dtype = _nifti_payload_dtype(grid)
    datatype, bitpix = _NIFTI_CODES[dtype]
    nz, ny, nx = grid.dims
    sz, sy, sx = grid.spacing
    oz, oy, ox = grid.origin

    hdr = bytearray(_NIFTI_HEADER_BYTES)
    struct.pack_into("<i", hdr, 0, _NIFTI_HEADER_BYTES)
    struct.pack_into("<c", hdr, 38, b"r")
    struct.pack_into("<8h", hdr, 40, 3, nx, ny, nz, 1, 1, 1, 1)
    struct.pack_into("<2h", hdr, 70, datatype, bitpix)
    struct.pack_into("<8f", hdr, 76, 1.0, sx, sy, sz, 0.0, 0.0, 0.0, 0.0)
    struct.pack_into("<f", hdr, 108, float(_NIFTI_VOX_OFFSET))
    struct.pack_into("<2f", hdr, 112, 1.0, 0.0)  # scl_slope, scl_inter
    hdr[123] = 2  # spatial units: millimetres
    hdr[148 : 148 + 7] = b"lnquant"
    struct.pack_into("<2h", hdr, 252, 0, 1)  # qform off, sform on
    struct.pack_into("<4f", hdr, 280, sx, 0.0, 0.0, ox)
    struct.pack_into("<4f", hdr, 296, 0.0, sy, 0.0, oy)
    struct.pack_into("<4f", hdr, 312, 0.0, 0.0, sz, oz)
    name = grid.kind.encode("ascii")[:15]
    hdr[328 : 328 + len(name)] = name
    hdr[344:348] = b"n+1\x00"

    body = bytes(hdr) + b"\x00\x00\x00\x00" + np.ascontiguousarray(grid.data.astype(dtype)).tobytes()
    if path.name.lower().endswith(".gz"):
        body = gzip.compress(body, compresslevel=6, mtime=0)
    path.write_bytes(body)


# -- raw payload + JSON sidecar ------------------------------------------------


def _sidecar_payload_path(sidecar: Path, data_file: str) -> Path:
    return sidecar.parent / data_file


def _read_sidecar(path: Path) -> VolumeGrid:
    try:
        meta = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise VolumeFormatError(f"{path.name}: invalid sidecar JSON: {exc}") from exc
    for key in ("dims", "spacing", "origin", "kind", "dtype", "data_file"):
        if key not in meta:
            raise VolumeFormatError(f"{path.name}: sidecar missing key {key!r}")
    if meta.get("format", RAW_FORMAT_TAG) != RAW_FORMAT_TAG:
        raise VolumeFormatError(f"{path.name}: unknown sidecar format {meta['format']!r}")
    if meta["dtype"] not in _RAW_DTYPES:
        raise VolumeFormatError(f"{path.name}: unsupported dtype {meta['dtype']!r}")
    if meta.get("byte_order", "little") != "little":
        raise VolumeFormatError(f"{path.name}: only little-endian payloads are supported")
    dims = tuple(int(d) for d in meta["dims"])
    if len(dims) != 3 or min(dims) < 1:
        raise VolumeFormatError(f"{path.name}: bad dims {meta['dims']}")
    dtype = np.dtype(meta["dtype"]).newbyteorder("<")

    data_path = _sidecar_payload_path(path, meta["data_file"])
    if not data_path.exists():
        raise VolumeFormatError(f"{path.name}: payload file {meta['data_file']!r} not found")
    payload = data_path.read_bytes()
    count = dims[0] * dims[1] * dims[2]
    if len(payload) != count * dtype.itemsize:
        raise VolumeFormatError(
            f"{data_path.name}: payload holds {len(payload)} bytes, sidecar expects {count * dtype.itemsize}"
        )
    arr = np.frombuffer(payload, dtype=dtype, count=count).reshape(dims)
    return VolumeGrid(arr, meta["spacing"], meta["origin"], meta["kind"])


def _write_sidecar(grid: VolumeGrid, path: Path) -> None:
    dtype = grid.data.dtype
    if dtype.name not in _RAW_DTYPES:
        raise VolumeFormatError(f"cannot serialise dtype {dtype.name} to the raw format")
    data_file = path.name[: -len(".json")] + ".raw"
    meta = {
        "format": RAW_FORMAT_TAG,
        "dims": list(grid.dims),
        "spacing": list(grid.spacing),
        "origin": list(grid.origin),
        "kind": grid.kind,
        "dtype": dtype.name,
        "byte_order": "little",
        "order": "z-major",
        "data_file": data_file,
    }
    payload = np.ascontiguousarray(grid.data.astype(dtype.newbyteorder("<"))).tobytes()
    _sidecar_payload_path(path, data_file).write_bytes(payload)
    path.write_text(json.dumps(meta, indent=2) + "\n")
