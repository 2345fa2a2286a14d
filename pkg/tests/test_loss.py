import math
import numpy as np
import pytest
import torch
from errors import ShapeError
from training.loss import dice_ce_loss, DICE_SMOOTH


def _scalar_loss(probs: np.ndarray, labels: np.ndarray, smooth: float = DICE_SMOOTH) -> float:
    batch, classes = probs.shape[:2]
    voxels = [(b, i, j, k) for b in range(batch) for i in range(labels.shape[1])
              for j in range(labels.shape[2]) for k in range(labels.shape[3])]
    cross_entropy = 0.0
    for b, i, j, k in voxels:
        cross_entropy -= math.log(max(probs[b, labels[b, i, j, k], i, j, k], 1e-12))
    cross_entropy /= len(voxels)
    dice = []
    for c in range(1, classes):
        intersection = total = 0.0
        for b, i, j, k in voxels:
            p = probs[b, c, i, j, k]
            t = 1.0 if labels[b, i, j, k] == c else 0.0
            intersection += p * t
            total += p + t
        dice.append((2.0 * intersection + smooth) / (total + smooth))
    return cross_entropy + 1.0 - sum(dice) / len(dice)


def test_loss_matches_a_voxel_by_voxel_computation(rng):
    for _ in range(5):
        logits = rng.normal(size=(2, 4, 3, 4, 2))
        probs = np.exp(logits) / np.exp(logits).sum(axis=1, keepdims=True)
        labels = rng.integers(0, 4, size=(2, 3, 4, 2))
        loss, dice = dice_ce_loss(torch.from_numpy(probs), labels)
        assert float(loss) == pytest.approx(_scalar_loss(probs, labels), abs=1e-10)
        assert dice.shape == (3,)


def test_uniform_probabilities_give_log_four_cross_entropy():
    probs = torch.full((1, 4, 2, 2, 2), 0.25, dtype=torch.float64)
    labels = torch.zeros((1, 2, 2, 2), dtype=torch.long)
    loss, dice = dice_ce_loss(probs, labels)
    # Absent foreground classes: dice = smooth / (2 + smooth).
    expected_dice = DICE_SMOOTH / (8 * 0.25 + DICE_SMOOTH)
    assert float(loss) == pytest.approx(math.log(4.0) + 1.0 - expected_dice, abs=1e-12)
    assert torch.allclose(dice, torch.full((3,), expected_dice, dtype=torch.float64))


def test_zero_probability_gives_a_finite_loss():
    probs = torch.zeros((1, 4, 1, 1, 2), dtype=torch.float64)
    probs[:, 0] = 1.0
    loss, _ = dice_ce_loss(probs, torch.full((1, 1, 1, 2), 3))
    assert math.isfinite(float(loss))


def test_shapes_must_pair():
    with pytest.raises(ShapeError):
        dice_ce_loss(torch.full((1, 4, 2, 2, 2), 0.25), torch.zeros((1, 2, 3, 2), dtype=torch.long))
