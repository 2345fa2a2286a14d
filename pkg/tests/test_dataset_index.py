import json
import numpy as np
import pytest
from errors import PreconditionError, ConfigError, DomainError
from oct_types import Split
from io_data.volume import Volume, LabelMask
from io_data.metaimage import write_metaimage
from io_data.dataset_index import DatasetIndex, IndexEntry


def _write_pair(directory, name, vendor, fill=0):
    volume = Volume(np.full((4, 4, 2), 10.0, dtype=np.float32), (0.1, 0.1, 0.5))
    labels = np.zeros((4, 4, 2), dtype=np.uint8)
    labels[0, 0, 0] = fill
    write_metaimage(volume, str(directory / (name + ".mha")))
    write_metaimage(LabelMask(labels, (0.1, 0.1, 0.5)), str(directory / (name + "_mask.mha")))
    return IndexEntry(name + ".mha", vendor, Split.TRAIN, name + "_mask.mha")


def test_index_resolves_paths_against_its_file(tmp_path):
    entries = [_write_pair(tmp_path, "a", "Cirrus", 1), _write_pair(tmp_path, "b", "Topcon", 2)]
    DatasetIndex(entries).save(str(tmp_path / "index.json"))
    index = DatasetIndex.load(str(tmp_path / "index.json"))
    assert len(index) == 2
    volume, mask = index.load_pair(index.entries[1])
    assert volume.vendor == "Topcon"
    assert volume.meta['split'] == "train"
    assert mask.labels() == (0, 2)


def test_select_by_split_and_vendor():
    entries = [IndexEntry("a.mhd", "Cirrus", Split.TRAIN, "a_mask.mhd"),
               IndexEntry("b.mhd", "Spectralis", Split.TRAIN, "b_mask.mhd"),
               IndexEntry("c.mhd", "Spectralis", Split.TEST)]
    index = DatasetIndex(entries)
    assert [e.volume for e in index.select(Split.TRAIN).entries] == ["a.mhd", "b.mhd"]
    assert [e.volume for e in index.select(vendors=["Spectralis"]).entries] == ["b.mhd", "c.mhd"]
    assert [e.volume for e in index.select(Split.TEST, ["Cirrus"]).entries] == []
    assert index.vendors() == ["Cirrus", "Spectralis"]
    assert [e.volume for e in index.train_entries()] == ["a.mhd", "b.mhd"]


def test_duplicate_paths_are_rejected():
    with pytest.raises(PreconditionError):
        DatasetIndex([IndexEntry("a.mhd", "Cirrus", Split.TEST), IndexEntry("a.mhd", "Topcon", Split.TEST)])


def test_training_entries_need_a_mask():
    with pytest.raises(PreconditionError):
        DatasetIndex([IndexEntry("a.mhd", "Cirrus", Split.TRAIN)])


def test_bad_entries(tmp_path):
    with pytest.raises(DomainError):
        IndexEntry("a.mhd", "Zeiss", Split.TEST)
    path = tmp_path / "index.json"
    path.write_text(json.dumps([{'volume': "a.mhd", 'vendor': "Cirrus"}]))
    with pytest.raises(ConfigError):
        DatasetIndex.load(str(path))
    path.write_text(json.dumps({'volume': "a.mhd"}))
    with pytest.raises(ConfigError):
        DatasetIndex.load(str(path))
