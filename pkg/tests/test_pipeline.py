import os
import pytest
from oct_types import FLUID_CLASSES
from io_data.phantom import generate_phantom
from io_data.fingerprint import fingerprint_from_pairs
from planner.plan_config import PlanConfig
from network.builder import build_raspp
from network.parameters import init_parameters
from training.configs import TrainConfig, AugmentationConfig
from training.sampler import prepare_cases
from training.trainer import train
from training.inference import predict_volume
from evaluation.metrics import dice_score, detection_score, DetectionRecord, roc_auc
from harness.experiment_config import ExperimentConfig
from harness import commands
from harness.loo import cmd_loo, MANIFEST_FILE


def _loo_config(index: str, output: str) -> ExperimentConfig:
    cfg = ExperimentConfig()
    cfg.index = index
    cfg.output = output
    cfg.vendors_train = ["Spectralis", "Topcon"]
    cfg.vendors_test = ["Cirrus"]
    cfg.model = "raspp"
    cfg.plan_overrides = {'base_features': 2, 'max_features': 8}
    cfg.train = TrainConfig(max_epochs=5, batches_per_epoch=2)
    cfg.augmentation = AugmentationConfig(rotation_probability=0.5, noise_probability=0.5)
    cfg.seed = 11
    return cfg


@pytest.mark.slow
def test_deterministic_runs_write_identical_reports(tmp_path):
    data = tmp_path / "data"
    commands.cmd_phantom(0, "Tiny", 2, str(data), vendors=["Cirrus", "Spectralis", "Topcon"], blobs_per_class=(1, 2))
    index = str(data / "index.json")
    reports = []
    for run in ("first", "second"):
        output = tmp_path / run
        report = cmd_loo(_loo_config(index, str(output)))
        assert report.vendors() == ["Cirrus"]
        assert os.path.isfile(str(output / MANIFEST_FILE))
        with open(str(output / "report.csv"), "rb") as fd:
            reports.append(fd.read())
    assert reports[0] == reports[1]


@pytest.mark.slow
def test_two_phantoms_can_be_overfitted():
    pairs = [generate_phantom(seed, "Tiny", blobs_per_class=(1, 2)) for seed in (7, 8)]
    fingerprint = fingerprint_from_pairs(pairs)
    plan = PlanConfig(pairs[0][0].spacing, (32, 32, 16), 2, (2, 2, 1), base_features=4, max_features=16)
    spec = build_raspp(plan)
    assert spec.param_count() <= 200000
    cfg = TrainConfig(learning_rate=0.01, max_epochs=200, batches_per_epoch=2, seed=0)
    checkpoint = train(spec, init_parameters(spec, 0), prepare_cases(pairs, fingerprint, plan), plan, cfg,
                       AugmentationConfig.disabled(), fingerprint)
    losses = checkpoint.losses()
    assert sum(losses[-5:]) < sum(losses[:5])
    for volume, mask in pairs:
        pred = predict_volume(checkpoint, volume).argmax()
        for c in FLUID_CLASSES:
            assert dice_score(pred, mask, c) >= 0.9

    records = []
    for seed in range(100, 110):
        blobs = (1, 2) if seed < 105 else (0, 0)
        volume, mask = generate_phantom(seed, "Tiny", blobs_per_class=blobs)
        probs = predict_volume(checkpoint, volume)
        score = max(detection_score(probs, c) for c in FLUID_CLASSES)
        records.append(DetectionRecord(str(seed), 0, score, int(mask.count(0) < mask.array.size)))
    assert roc_auc(records) == 1.0
