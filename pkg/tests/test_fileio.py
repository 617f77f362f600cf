import gzip

import numpy as np
import pytest

from lnquant import VolumeFormatError, VolumeGrid, grids_equal, read_volume, write_volume
from lnquant.phantom import generate_phantom
from conftest import two_node_phantom_spec


def _grids():
    rng = np.random.default_rng(5)
    yield VolumeGrid(rng.normal(0, 100, (4, 6, 5)).astype(np.float32), (3.0, 0.93, 0.93), (1, 2, 3))
    yield VolumeGrid(rng.integers(0, 2, (7, 3, 4)).astype(np.uint8), (1.0, 1.0, 1.0), kind="label")
    yield VolumeGrid(rng.integers(0, 105, (5, 5, 5)).astype(np.int16), (2.5, 0.7, 0.7), kind="label")
    yield VolumeGrid(rng.integers(0, 3, (4, 4, 4)).astype(np.uint8), (1.5, 1.5, 1.5), kind="tristate")


@pytest.mark.parametrize("ext", [".nii", ".nii.gz", ".json"])
def test_round_trip_all_formats(tmp_path, ext):
    for i, g in enumerate(_grids()):
        path = tmp_path / f"vol{i}{ext}"
        write_volume(g, path)
        back = read_volume(path)
        assert grids_equal(g, back), f"{ext} round trip failed for kind {g.kind}"
        assert back.kind == g.kind


def test_raw_sidecar_payload_is_exact(tmp_path):
    g = VolumeGrid(np.random.default_rng(1).normal(0, 1, (3, 4, 5)), (1, 1, 1))
    assert g.data.dtype == np.float64
    write_volume(g, tmp_path / "v.json")
    back = read_volume(tmp_path / "v.json")
    assert back.data.dtype == np.float64
    assert np.array_equal(back.data, g.data)


def test_sidecar_4x4x4_identity(tmp_path):
    arr = np.arange(64, dtype=np.int16).reshape(4, 4, 4) % 3
    g = VolumeGrid(arr, (1.0, 1.0, 1.0), kind="label")
    write_volume(g, tmp_path / "v.json")
    back = read_volume(tmp_path / "v.json")
    assert back.num_voxels == 64
    assert grids_equal(g, back)


def test_compressed_twin_matches_uncompressed(tmp_path):
    case = generate_phantom(two_node_phantom_spec())
    write_volume(case.image, tmp_path / "plain.nii")
    write_volume(case.image, tmp_path / "packed.nii.gz")
    plain = read_volume(tmp_path / "plain.nii")
    packed = read_volume(tmp_path / "packed.nii.gz")
    assert plain.data.sum() == packed.data.sum()
    assert grids_equal(plain, packed)


def test_gzip_detected_by_magic_not_suffix(tmp_path):
    g = VolumeGrid(np.ones((2, 2, 2), dtype=np.uint8), (1, 1, 1), kind="label")
    write_volume(g, tmp_path / "v.nii.gz")
    disguised = tmp_path / "w.nii"
    disguised.write_bytes((tmp_path / "v.nii.gz").read_bytes())
    assert grids_equal(g, read_volume(disguised))


def test_missing_file_raises(tmp_path):
    with pytest.raises(FileNotFoundError):
        read_volume(tmp_path / "nope.nii")


def test_write_to_missing_parent_raises(tmp_path):
    g = VolumeGrid(np.ones((2, 2, 2), dtype=np.uint8), (1, 1, 1), kind="label")
    with pytest.raises(FileNotFoundError):
        write_volume(g, tmp_path / "missing_dir" / "v.nii")


def test_unsupported_extension(tmp_path):
    (tmp_path / "v.mhd").write_text("x")
    with pytest.raises(VolumeFormatError):
        read_volume(tmp_path / "v.mhd")
    g = VolumeGrid(np.ones((2, 2, 2), dtype=np.uint8), (1, 1, 1), kind="label")
    with pytest.raises(VolumeFormatError):
        write_volume(g, tmp_path / "v.mhd")


def test_truncated_payload_rejected(tmp_path):
    g = VolumeGrid(np.ones((4, 4, 4), dtype=np.uint8), (1, 1, 1), kind="label")
    path = tmp_path / "v.nii"
    write_volume(g, path)
    blob = path.read_bytes()
    path.write_bytes(blob[:-10])
    with pytest.raises(VolumeFormatError, match="payload"):
        read_volume(path)


def test_bad_header_rejected(tmp_path):
    path = tmp_path / "v.nii"
    path.write_bytes(b"\x00" * 400)
    with pytest.raises(VolumeFormatError):
        read_volume(path)


def test_unsupported_datatype_rejected(tmp_path):
    g = VolumeGrid(np.ones((2, 2, 2), dtype=np.uint8), (1, 1, 1), kind="label")
    path = tmp_path / "v.nii"
    write_volume(g, path)
    blob = bytearray(path.read_bytes())
    blob[70:72] = (64).to_bytes(2, "little")  # float64 datatype code
    blob[72:74] = (64).to_bytes(2, "little")
    path.write_bytes(bytes(blob))
    with pytest.raises(VolumeFormatError, match="datatype"):
        read_volume(path)


def test_sidecar_missing_key_rejected(tmp_path):
    g = VolumeGrid(np.ones((2, 2, 2), dtype=np.uint8), (1, 1, 1), kind="label")
    write_volume(g, tmp_path / "v.json")
    meta = (tmp_path / "v.json").read_text().replace('"kind"', '"knd"')
    (tmp_path / "v.json").write_text(meta)
    with pytest.raises(VolumeFormatError, match="kind"):
        read_volume(tmp_path / "v.json")


def test_sidecar_payload_size_mismatch(tmp_path):
    g = VolumeGrid(np.ones((2, 2, 2), dtype=np.uint8), (1, 1, 1), kind="label")
    write_volume(g, tmp_path / "v.json")
    (tmp_path / "v.raw").write_bytes(b"\x01" * 5)
    with pytest.raises(VolumeFormatError, match="payload"):
        read_volume(tmp_path / "v.json")


def test_metadata_precision_within_tolerance(tmp_path):
    g = VolumeGrid(np.zeros((3, 3, 3), dtype=np.float32), (3.0, 0.93, 0.93), (10.5, -7.25, 0.125))
    write_volume(g, tmp_path / "v.nii")
    back = read_volume(tmp_path / "v.nii")
    for a, b in zip(g.spacing + g.origin, back.spacing + back.origin):
        assert abs(a - b) <= 1e-6


def test_deterministic_gzip_bytes(tmp_path):
    g = VolumeGrid(np.ones((4, 4, 4), dtype=np.uint8), (1, 1, 1), kind="label")
    write_volume(g, tmp_path / "a.nii.gz")
    write_volume(g, tmp_path / "b.nii.gz")
    assert (tmp_path / "a.nii.gz").read_bytes() == (tmp_path / "b.nii.gz").read_bytes()
    with gzip.open(tmp_path / "a.nii.gz", "rb") as fh:
        assert fh.read(4) == (348).to_bytes(4, "little")
