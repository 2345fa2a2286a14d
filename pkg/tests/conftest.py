from typing import Tuple
import numpy as np
import pytest
from io_data.volume import Volume, LabelMask
from io_data.phantom import generate_phantom
from io_data.fingerprint import fingerprint_from_pairs, Fingerprint
from planner.plan_config import PlanConfig
from training.configs import TrainConfig, AugmentationConfig


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture
def tiny_pair() -> Tuple[Volume, LabelMask]:
    """
    A 32 x 32 x 16 phantom with at least one blob per fluid class.
    """
    return generate_phantom(7, "Tiny", blobs_per_class=(1, 2))


@pytest.fixture
def tiny_fingerprint(tiny_pair) -> Fingerprint:
    return fingerprint_from_pairs([tiny_pair])


@pytest.fixture
def toy_plan() -> PlanConfig:
    """
    Three stages, 4 features at full resolution: small enough for gradient checks.
    """
    return PlanConfig((0.05, 0.02, 0.1), (8, 8, 4), 2, (2, 2, 1), base_features=2, max_features=8)


@pytest.fixture
def tiny_plan(tiny_pair) -> PlanConfig:
    volume, _ = tiny_pair
    return PlanConfig(volume.spacing, (16, 16, 8), 2, (2, 2, 1), base_features=4, max_features=16)


@pytest.fixture
def quick_train() -> TrainConfig:
    return TrainConfig(learning_rate=0.01, max_epochs=2, batches_per_epoch=2, seed=3)


@pytest.fixture
def no_augmentation() -> AugmentationConfig:
    return AugmentationConfig.disabled(seed=3)


def random_mask(rng: np.random.Generator, shape=None, max_edge: int = 8) -> np.ndarray:
    if shape is None:
        shape = tuple(int(v) for v in rng.integers(1, max_edge + 1, size=3))
    return rng.integers(0, 4, size=shape).astype(np.uint8)
