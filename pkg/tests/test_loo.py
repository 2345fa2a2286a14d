import pytest
from errors import ConfigError
from oct_types import Split
from io_data.dataset_index import DatasetIndex, IndexEntry
from harness.experiment_config import ExperimentConfig
from harness.loo import split_manifest, retouch_split_counts, SplitManifest, manifest_lines, cmd_loo, \
    RETOUCH_TRAINING_COUNTS


@pytest.fixture
def public_index() -> DatasetIndex:
    entries = []
    for vendor, count in RETOUCH_TRAINING_COUNTS.items():
        for i in range(count):
            name = "{0}/{1:02d}".format(vendor, i)
            entries.append(IndexEntry(name + ".mhd", vendor, Split.TRAIN, name + "_mask.mhd"))
        entries.append(IndexEntry("{0}/unlabelled.mhd".format(vendor), vendor, Split.TEST))
    return DatasetIndex(entries)


@pytest.mark.parametrize("held_out, train_vendors, expected", [
    ("Cirrus", ["Spectralis", "Topcon"], 46),
    ("Topcon", ["Cirrus", "Spectralis"], 48),
    ("Spectralis", ["Cirrus", "Topcon"], 46),
])
def test_split_sizes_match_the_public_training_set(public_index, held_out, train_vendors, expected):
    manifest = split_manifest(public_index, train_vendors, held_out)
    manifest.verify()
    assert len(manifest.train) == expected == retouch_split_counts(train_vendors)
    assert len(manifest.test) == RETOUCH_TRAINING_COUNTS[held_out]
    assert all(e.vendor != held_out for e in manifest.train)
    assert all(e.mask is not None for e in manifest.train + tuple(manifest.test))
    assert manifest.to_dict()['train_per_vendor'] == {v: RETOUCH_TRAINING_COUNTS[v] for v in sorted(train_vendors)}
    assert manifest_lines(manifest)[-1] == "total    : {0:d} training volumes".format(expected)


def test_leaks_are_detected():
    a = IndexEntry("a.mhd", "Cirrus", Split.TRAIN, "a_mask.mhd")
    b = IndexEntry("b.mhd", "Topcon", Split.TRAIN, "b_mask.mhd")
    with pytest.raises(ConfigError):
        SplitManifest("Cirrus", [a, b], []).verify()
    with pytest.raises(ConfigError):
        SplitManifest("Spectralis", [a, b], [b]).verify()


def test_bad_vendor_sets(public_index):
    with pytest.raises(ConfigError):
        split_manifest(public_index, ["Spectralis"], "Cirrus")
    with pytest.raises(ConfigError):
        split_manifest(public_index, ["Spectralis", "Cirrus"], "Cirrus")
    with pytest.raises(ConfigError):
        retouch_split_counts(["Topcon-T1000"])


def test_overlapping_vendors_are_refused_before_training(tmp_path, public_index):
    path = tmp_path / "index.json"
    public_index.save(str(path))
    cfg = ExperimentConfig()
    cfg.index = str(path)
    cfg.output = str(tmp_path / "out")
    cfg.vendors_train = ["Spectralis", "Topcon"]
    cfg.vendors_test = ["Topcon"]
    with pytest.raises(ConfigError):
        cmd_loo(cfg)
    cfg.vendors_test = ["Cirrus", "Phantom"]
    with pytest.raises(ConfigError):
        cmd_loo(cfg)
