import numpy as np
import pytest
from errors import PreconditionError, DomainError
from io_data.volume import Volume, LabelMask
from oct_types import Split
from io_data.dataset_index import DatasetIndex, IndexEntry
from io_data.fingerprint import fingerprint_from_pairs, extract_fingerprint, Fingerprint
from io_data.preprocessing import resampled_shape, resample, resample_array, normalize
from io_data.phantom import generate_phantom, VENDOR_PROFILES
from harness.commands import cmd_phantom


def _pair(rng, shape, spacing, labels=(0, 1)):
    volume = Volume(rng.normal(50.0, 10.0, size=shape).astype(np.float32), spacing)
    mask = LabelMask(rng.choice(labels, size=shape).astype(np.uint8), spacing)
    return volume, mask


def test_statistics_match_the_pooled_foreground(rng):
    pairs = [_pair(rng, (6, 5, 4), (0.1, 0.2, 0.3)), _pair(rng, (8, 5, 2), (0.2, 0.2, 0.3), (0, 2, 3))]
    fingerprint = fingerprint_from_pairs(pairs)
    pooled = np.concatenate([v.array.astype(np.float64)[m.array != 0] for v, m in pairs])
    stats = fingerprint.intensity_stats
    assert stats.mean == pytest.approx(pooled.mean(), abs=1e-9)
    assert stats.std == pytest.approx(pooled.std(), abs=1e-9)
    assert stats.percentile_00_5 == pytest.approx(np.percentile(pooled, 0.5), abs=1e-9)
    assert stats.percentile_99_5 == pytest.approx(np.percentile(pooled, 99.5), abs=1e-9)
    assert stats.percentile_00_5 <= stats.mean <= stats.percentile_99_5
    assert fingerprint.shapes == ((6, 5, 4), (8, 5, 2))
    assert fingerprint.class_presence == {1: 0.5, 2: 0.5, 3: 0.5}
    assert fingerprint.median_spacing == pytest.approx((0.15, 0.2, 0.3))


def test_statistics_do_not_depend_on_the_order(rng):
    pairs = [_pair(rng, (4, 4, 4), (1.0, 1.0, 1.0)) for _ in range(3)]
    forward = fingerprint_from_pairs(pairs).intensity_stats.to_dict()
    backward = fingerprint_from_pairs(pairs[::-1]).intensity_stats.to_dict()
    assert forward == backward


def test_empty_training_set():
    with pytest.raises(PreconditionError):
        fingerprint_from_pairs([])


def test_fingerprint_document_rebuilds_the_fingerprint(tiny_fingerprint):
    rebuilt = Fingerprint.from_dict(tiny_fingerprint.to_dict())
    assert rebuilt.to_dict() == tiny_fingerprint.to_dict()
    assert rebuilt.modality == "OCT"


def test_resampled_shape():
    assert resampled_shape((512, 496, 49), (0.011301, 0.003872, 0.122588), (0.011301, 0.003872, 0.122588)) == \
        (512, 496, 49)
    assert resampled_shape((10, 10, 10), (1.0, 1.0, 1.0), (2.0, 0.5, 100.0)) == (5, 20, 1)


def test_mask_resampling_creates_no_label(rng):
    labels = rng.choice([0, 2], size=(9, 7, 5)).astype(np.uint8)
    mask = LabelMask(labels, (1.0, 1.0, 1.0))
    resampled = resample(mask, (0.7, 1.3, 0.5))
    assert set(resampled.labels()) <= {0, 2}
    assert resampled.spacing == (0.7, 1.3, 0.5)
    assert resampled.shape == resampled_shape(mask.shape, mask.spacing, (0.7, 1.3, 0.5))


def test_resampling_to_the_same_spacing_is_the_identity(rng):
    volume = Volume(rng.normal(size=(5, 4, 3)).astype(np.float32), (0.5, 0.5, 2.0))
    assert resample(volume, (0.5, 0.5, 2.0)) == volume
    with pytest.raises(DomainError):
        resample(volume, (0.5, 0.0, 2.0))


def test_linear_resampling_keeps_linear_ramps():
    ramp = np.broadcast_to(np.arange(8, dtype=np.float64)[:, None, None], (8, 2, 2)).copy()
    up = resample_array(ramp, (15, 2, 2), order=1)
    assert np.all(np.diff(up[:, 0, 0]) >= 0)
    assert up[0, 0, 0] == pytest.approx(0.0)
    assert up[-1, 0, 0] == pytest.approx(7.0)


def test_normalization_clips_then_standardizes(tiny_pair, tiny_fingerprint):
    volume, _ = tiny_pair
    stats = tiny_fingerprint.intensity_stats
    normalized = normalize(volume, tiny_fingerprint)
    expected = (np.clip(volume.array.astype(np.float64), stats.percentile_00_5, stats.percentile_99_5)
                - stats.mean) / stats.std
    assert normalized.array.dtype == np.float32
    assert np.allclose(normalized.array, expected, atol=1e-5)


def test_phantoms_are_pure_functions_of_their_seed():
    first_volume, first_mask = generate_phantom(11, "Tiny")
    second_volume, second_mask = generate_phantom(11, "Tiny")
    assert first_volume == second_volume
    assert first_mask == second_mask
    assert generate_phantom(12, "Tiny")[0] != first_volume


def test_phantom_blob_range_controls_fluid_presence():
    _, empty = generate_phantom(3, "Tiny", blobs_per_class=(0, 0))
    assert empty.labels() == (0,)
    _, full = generate_phantom(3, "Tiny", blobs_per_class=(2, 2))
    assert full.count(0) > 0
    assert len(full.labels()) >= 2
    assert set(full.labels()) <= {0, 1, 2, 3}


def test_phantom_vendor_override_and_profiles():
    volume, mask = generate_phantom(0, "Tiny", vendor="Cirrus")
    assert volume.vendor == "Cirrus"
    assert mask.shape == volume.shape == (32, 32, 16)
    assert VENDOR_PROFILES["Topcon"].dims == (512, 885, 128)
    assert VENDOR_PROFILES["Topcon-T1000"].dims == (512, 650, 128)
    assert VENDOR_PROFILES["Cirrus"].dims == (512, 1024, 128)
    assert VENDOR_PROFILES["Spectralis"].dims == (512, 496, 49)
    with pytest.raises(DomainError):
        generate_phantom(0, "Zeiss")


def test_fingerprint_of_an_index_uses_its_training_entries(tmp_path):
    cmd_phantom(2, "Tiny", 3, str(tmp_path), blobs_per_class=(1, 1))
    index = DatasetIndex.load(str(tmp_path / "index.json"))
    pairs = [index.load_pair(e) for e in index.entries]
    assert extract_fingerprint(index).to_dict() == fingerprint_from_pairs(pairs).to_dict()
    with pytest.raises(PreconditionError):
        extract_fingerprint(DatasetIndex([IndexEntry("absent.mha", "Cirrus", Split.TEST)]))
