import numpy as np
import pytest

from lnquant import (
    NodeSpec,
    OrganSpec,
    PhantomSpec,
    connected_components,
    from_weak_labels,
    generate_phantom,
    strategy_pseudo_labeling,
    voxel_stats,
)
from conftest import CT_SPACING, two_node_phantom_spec


class TestPhantomSpec:
    def test_json_round_trip(self, tmp_path):
        spec = two_node_phantom_spec()
        spec.to_json_file(tmp_path / "spec.json")
        back = PhantomSpec.from_json_file(tmp_path / "spec.json")
        assert back == spec

    def test_node_outside_volume_rejected(self):
        with pytest.raises(ValueError):
            PhantomSpec(
                dims=(4, 4, 4), spacing=(1, 1, 1), seed=0,
                nodes=(NodeSpec((50.0, 0.0, 0.0), (1.0, 1.0, 1.0)),),
            )

    def test_with_seed(self):
        spec = two_node_phantom_spec(seed=3)
        assert spec.with_seed(9).seed == 9
        assert spec.with_seed(9).nodes == spec.nodes


class TestGeneratePhantom:
    def test_deterministic_for_same_spec(self):
        spec = two_node_phantom_spec()
        a = generate_phantom(spec)
        b = generate_phantom(spec)
        for va, vb in ((a.image, b.image), (a.gt, b.gt), (a.weak, b.weak), (a.anatomy, b.anatomy)):
            assert np.array_equal(va.data, vb.data)

    def test_different_seed_changes_noise_only(self):
        spec = two_node_phantom_spec(seed=1)
        a = generate_phantom(spec)
        b = generate_phantom(spec.with_seed(2))
        assert not np.array_equal(a.image.data, b.image.data)
        assert np.array_equal(a.gt.data, b.gt.data)
        assert np.array_equal(a.anatomy.data, b.anatomy.data)

    def test_component_counts_follow_spec(self):
        spec = PhantomSpec(
            dims=(16, 40, 40), spacing=CT_SPACING, seed=5,
            nodes=(
                NodeSpec((12.0, 8.0, 8.0), (4.0, 4.0, 4.0), annotated=True),
                NodeSpec((30.0, 26.0, 26.0), (5.0, 5.0, 5.0), annotated=False),
                NodeSpec((12.0, 28.0, 10.0), (3.0, 3.0, 3.0), annotated=False),
            ),
        )
        case = generate_phantom(spec)
        assert len(connected_components(case.gt)) == 3
        assert len(connected_components(case.weak)) == 1
        assert np.all((case.weak.data == 1) <= (case.gt.data == 1))

    def test_hidden_is_gt_minus_weak(self):
        case = generate_phantom(two_node_phantom_spec())
        assert np.array_equal(
            case.hidden.data.astype(bool),
            case.gt.data.astype(bool) & ~case.weak.data.astype(bool),
        )

    def test_organ_fraction_drives_supervision_ratio(self):
        # one organ covering half the volume: pseudo labeling must reach >= 50%
        spec = PhantomSpec(
            dims=(10, 10, 10), spacing=(1, 1, 1), seed=0,
            organs=(OrganSpec((0.0, 0.0, 0.0), (9.0, 9.0, 4.0), label=7),),
        )
        case = generate_phantom(spec)
        fraction = (case.anatomy.data > 0).mean()
        state = strategy_pseudo_labeling(from_weak_labels(case.weak), case.anatomy)
        assert voxel_stats(state).ratio_percent >= fraction * 100.0 - 1e-9

    def test_node_hu_wins_over_organ_hu(self):
        spec = PhantomSpec(
            dims=(8, 8, 8), spacing=(1, 1, 1), seed=0, noise_std=0.0,
            nodes=(NodeSpec((3.0, 3.0, 3.0), (1.5, 1.5, 1.5), hu=60.0),),
            organs=(OrganSpec((0.0, 0.0, 0.0), (7.0, 7.0, 7.0), label=3, hu=200.0),),
        )
        case = generate_phantom(spec)
        assert case.image.data[3, 3, 3] == pytest.approx(60.0)
        assert case.image.data[0, 0, 0] == pytest.approx(200.0)
