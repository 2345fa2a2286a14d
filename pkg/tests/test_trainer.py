import numpy as np
import pytest
import torch
from errors import NonFiniteLossError, PreconditionError
from network.builder import build_unet, build_raspp
from network.parameters import init_parameters
from training.configs import TrainConfig
from training.sampler import TrainingCase, prepare_cases
from training.trainer import train, optimizer_step
from training.checkpoint import Checkpoint


@pytest.fixture
def toy_cases(rng):
    labels = rng.integers(0, 4, size=(8, 8, 4)).astype(np.uint8)
    image = (labels.astype(np.float32) + rng.normal(0.0, 0.1, size=labels.shape)).astype(np.float32)
    return [TrainingCase(image, labels, "toy")]


def test_zero_epochs_return_the_initial_weights(toy_plan, toy_cases, no_augmentation):
    spec = build_unet(toy_plan)
    params = init_parameters(spec, 0)
    checkpoint = train(spec, params, toy_cases, toy_plan, TrainConfig(max_epochs=0), no_augmentation)
    assert checkpoint.epoch == 0
    assert checkpoint.history == ()
    assert checkpoint.parameters.equal(params)


def test_non_finite_loss_stops_the_run(toy_plan, no_augmentation):
    labels = np.zeros((8, 8, 4), dtype=np.uint8)
    case = TrainingCase(np.full((8, 8, 4), np.nan, dtype=np.float32), labels)
    spec = build_unet(toy_plan)
    with pytest.raises(NonFiniteLossError) as info:
        train(spec, init_parameters(spec, 0), [case], toy_plan, TrainConfig(max_epochs=1, batches_per_epoch=1),
              no_augmentation)
    assert info.value.epoch == 0
    assert info.value.batch == 0


def test_empty_training_set(toy_plan, quick_train, no_augmentation):
    spec = build_unet(toy_plan)
    with pytest.raises(PreconditionError):
        train(spec, init_parameters(spec, 0), [], toy_plan, quick_train, no_augmentation)


def test_synchronous_training_is_reproducible(toy_plan, toy_cases, quick_train, no_augmentation):
    spec = build_raspp(toy_plan)
    params = init_parameters(spec, 2)
    first = train(spec, params, toy_cases, toy_plan, quick_train, no_augmentation)
    second = train(spec, params, toy_cases, toy_plan, quick_train, no_augmentation)
    assert first.parameters.equal(second.parameters)
    assert first.history == second.history
    assert [e for e, _, _ in first.history] == [0, 1]
    assert first.history[0][1] == pytest.approx(0.01)
    assert not first.parameters.equal(params)


def test_checkpoint_survives_a_save(tmp_path, tiny_pair, tiny_fingerprint, tiny_plan, quick_train, no_augmentation):
    cases = prepare_cases([tiny_pair], tiny_fingerprint, tiny_plan)
    spec = build_unet(tiny_plan)
    checkpoint = train(spec, init_parameters(spec, 0), cases, tiny_plan, quick_train, no_augmentation,
                       fingerprint=tiny_fingerprint).with_postprocessing({1: True, 2: False, 3: True})
    checkpoint.save(str(tmp_path))
    loaded = Checkpoint.load(str(tmp_path))
    assert loaded.spec == spec
    assert loaded.plan == tiny_plan
    assert loaded.parameters.equal(checkpoint.parameters)
    assert loaded.history == checkpoint.history
    assert loaded.postprocessing == {1: True, 2: False, 3: True}
    assert loaded.fingerprint.to_dict() == tiny_fingerprint.to_dict()
    assert loaded.optimizer_state is not None


def test_zero_learning_rate_step_keeps_the_weights(toy_plan, toy_cases, rng):
    spec = build_unet(toy_plan)
    params = init_parameters(spec, 4)
    images = rng.normal(size=(2, 1) + toy_plan.patch_size).astype(np.float32)
    labels = rng.integers(0, 4, size=(2,) + toy_plan.patch_size)
    unchanged, loss = optimizer_step(spec, params, images, labels, TrainConfig(), 0.0)
    assert unchanged.equal(params)
    assert np.isfinite(loss)
    moved, _ = optimizer_step(spec, params, images, labels, TrainConfig(), 0.01)
    assert not moved.equal(params)
    assert all(not t.requires_grad for t in moved.tensors.values())
    assert isinstance(moved["head.weight"], torch.Tensor)
