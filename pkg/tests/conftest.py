import numpy as np
import pytest

from lnquant import KIND_LABEL, NodeSpec, OrganSpec, PhantomSpec, VolumeGrid

# canonical anisotropic CT spacing used throughout the tests
CT_SPACING = (3.0, 0.93, 0.93)


def label_grid(arr, spacing=(1.0, 1.0, 1.0)) -> VolumeGrid:
    return VolumeGrid(np.asarray(arr, dtype=np.uint8), spacing, kind="label")


def random_mask(rng, max_dim=16, density=None, spacing=(1.0, 1.0, 1.0)) -> VolumeGrid:
    dims = tuple(int(rng.integers(3, max_dim + 1)) for _ in range(3))
    if density is None:
        density = float(rng.uniform(0.05, 0.9))
    arr = (rng.random(dims) < density).astype(np.uint8)
    return VolumeGrid(arr, spacing, kind="label")


def sphere_grid(radius_mm, spacing=CT_SPACING, pad_voxels=2, value=1) -> VolumeGrid:
    """Digitised sphere with its centre exactly on a voxel centre."""
    half = [int(np.ceil(radius_mm / s)) + pad_voxels for s in spacing]
    dims = tuple(2 * h + 1 for h in half)
    coords = [(np.arange(d) - h) * s for d, h, s in zip(dims, half, spacing)]
    q = (
        coords[0][:, None, None] ** 2
        + coords[1][None, :, None] ** 2
        + coords[2][None, None, :] ** 2
    )
    return VolumeGrid((q <= radius_mm**2).astype(np.uint8) * value, spacing, kind=KIND_LABEL)


def two_node_phantom_spec(seed=11) -> PhantomSpec:
    """One large annotated node, one small hidden node, lungs plus a
    mediastinal organ between them."""
    return PhantomSpec(
        dims=(16, 40, 40),
        spacing=CT_SPACING,
        seed=seed,
        nodes=(
            NodeSpec((24.0, 18.0, 12.0), (8.0, 8.0, 8.0), annotated=True, hu=60.0),
            NodeSpec((12.0, 18.0, 28.0), (3.0, 3.0, 3.0), annotated=False, hu=55.0),
        ),
        organs=(
            OrganSpec((3.0, 1.0, 0.0), (42.0, 35.0, 6.0), label=10, hu=-600.0),
            OrganSpec((3.0, 1.0, 30.0), (42.0, 35.0, 36.2), label=12, hu=-600.0),
            OrganSpec((6.0, 25.0, 9.0), (39.0, 34.0, 28.0), label=44, hu=120.0),
        ),
        noise_std=8.0,
    )


@pytest.fixture
def rng():
    return np.random.default_rng(20230911)
