import json
import os
import pytest
from errors import PreconditionError, MissingArtifactError
from io_data.metaimage import read_metaimage, write_metaimage
from training.configs import TrainConfig, AugmentationConfig
from harness.experiment_config import ExperimentConfig
from harness import commands


def _quick_config() -> ExperimentConfig:
    cfg = ExperimentConfig()
    cfg.model = "unet"
    cfg.plan_overrides = {'base_features': 2, 'max_features': 8}
    cfg.train = TrainConfig(max_epochs=1, batches_per_epoch=1)
    cfg.augmentation = AugmentationConfig.disabled()
    cfg.seed = 5
    return cfg


def _read(path) -> bytes:
    with open(path, "rb") as fd:
        return fd.read()


@pytest.fixture
def phantoms(tmp_path):
    directory = tmp_path / "data"
    commands.cmd_phantom(0, "Tiny", 3, str(directory), blobs_per_class=(1, 2))
    return directory


def test_phantom_dataset_is_reproducible(tmp_path, phantoms):
    assert sorted(os.listdir(str(phantoms))) == ["index.json"] + sorted(
        "phantom_{0:03d}_{1}.mha".format(i, kind) for i in range(3) for kind in ("mask", "volume"))
    again = tmp_path / "again"
    commands.cmd_phantom(0, "Tiny", 3, str(again), blobs_per_class=(1, 2))
    for name in os.listdir(str(phantoms)):
        assert _read(phantoms / name) == _read(again / name)
    with pytest.raises(PreconditionError):
        commands.cmd_phantom(0, "Tiny", 0, str(tmp_path / "none"))


def test_phantoms_per_vendor(tmp_path):
    index = commands.cmd_phantom(1, "Tiny", 2, str(tmp_path), vendors=["Cirrus", "Topcon"])
    assert [e.vendor for e in index.entries] == ["Cirrus", "Cirrus", "Topcon", "Topcon"]


def test_fingerprint_and_plan_are_reproducible(tmp_path, phantoms):
    index = str(phantoms / "index.json")
    first = commands.cmd_fingerprint(index, str(tmp_path / "f1.json"))
    commands.cmd_fingerprint(index, str(tmp_path / "f2.json"))
    assert _read(tmp_path / "f1.json") == _read(tmp_path / "f2.json")
    assert first.num_volumes == 3
    plan = commands.cmd_plan(str(tmp_path / "f1.json"), str(tmp_path / "plan.json"))
    assert plan.batch_size >= 2
    assert commands.load_plan(str(tmp_path / "plan.json")) == plan


def test_plan_overrides(tmp_path, phantoms):
    commands.cmd_fingerprint(str(phantoms / "index.json"), str(tmp_path / "f.json"))
    cfg = ExperimentConfig()
    cfg.plan_overrides = {'patch_size': [16, 16, 8], 'batch_size': 3}
    plan = commands.cmd_plan(str(tmp_path / "f.json"), str(tmp_path / "plan.json"), cfg)
    assert plan.patch_size == (16, 16, 8)
    assert plan.pools_per_axis == (1, 1, 0)
    assert plan.batch_size == 3


def test_train_predict_evaluate(tmp_path, phantoms):
    cfg = _quick_config()
    index = str(phantoms / "index.json")
    commands.cmd_fingerprint(index, str(tmp_path / "fingerprint.json"))
    commands.cmd_plan(str(tmp_path / "fingerprint.json"), str(tmp_path / "plan.json"), cfg)
    checkpoint = commands.cmd_train(index, str(tmp_path / "plan.json"), str(tmp_path / "fingerprint.json"),
                                    str(tmp_path / "checkpoint"), cfg)
    assert checkpoint.epoch == 1
    assert sorted(checkpoint.postprocessing) == [1, 2, 3]

    predictions = tmp_path / "predictions"
    records = commands.cmd_predict(str(tmp_path / "checkpoint"), index, str(predictions))
    assert [r['volume'] for r in records] == ["phantom_{0:03d}_volume.mha".format(i) for i in range(3)]
    mask = read_metaimage(str(predictions / records[0]['mask']))
    assert mask.shape == (32, 32, 16)
    assert sorted(records[0]['probabilities']) == ["IRF", "PED", "SRF", "background"]
    with open(str(predictions / "predictions.json")) as fd:
        assert json.load(fd)['predictions'] == records

    # Replace the predicted masks by the ground truth: every Dice is 1.
    for i, record in enumerate(records):
        gt = read_metaimage(str(phantoms / "phantom_{0:03d}_mask.mha".format(i)))
        write_metaimage(gt, str(predictions / record['mask']))
    report = commands.cmd_evaluate(index, str(predictions), str(tmp_path / "report"))
    assert report.overall_dice() == 1.0
    for name in ("report.csv", "report.json", "detection.csv", "roc_points.csv"):
        assert os.path.isfile(str(tmp_path / "report" / name))


def test_missing_artifacts(tmp_path, phantoms):
    with pytest.raises(MissingArtifactError):
        commands.cmd_fingerprint(str(tmp_path / "nothing.json"), str(tmp_path / "f.json"))
    with pytest.raises(MissingArtifactError):
        commands.cmd_plan(str(tmp_path / "nothing.json"), str(tmp_path / "plan.json"))
    with pytest.raises(MissingArtifactError):
        commands.cmd_predict(str(tmp_path / "no_checkpoint"), str(phantoms / "index.json"), str(tmp_path / "p"))
    with pytest.raises(MissingArtifactError):
        commands.cmd_evaluate(str(phantoms / "index.json"), str(tmp_path / "no_predictions"), str(tmp_path))


def test_ordered_map_keeps_the_input_order():
    items = list(range(20))
    assert commands.map_ordered(lambda v: v * v, items, workers=4) == [v * v for v in items]
    assert commands.map_ordered(lambda v: v + 1, items) == [v + 1 for v in items]


def test_validation_fold_is_disjoint_and_seeded():
    fitting, held_out = commands.validation_split(10, 0.2, seed=3)
    assert len(held_out) == 2
    assert sorted(fitting + held_out) == list(range(10))
    assert (fitting, held_out) == commands.validation_split(10, 0.2, seed=3)
    assert commands.validation_split(3, 0.2, seed=0)[1] != []
    assert len(commands.validation_split(2, 0.9, seed=0)[0]) == 1
    assert commands.validation_split(1, 0.5, seed=0) == ([0], [])
    assert commands.validation_split(5, 0.0, seed=0) == ([0, 1, 2, 3, 4], [])
