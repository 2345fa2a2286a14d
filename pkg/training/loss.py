from typing import Tuple, Union
import numpy as np
import torch
from errors import ShapeError

DICE_SMOOTH = 1e-5
# Probabilities are clamped before the logarithm so that a zero probability gives a finite loss.
PROBABILITY_FLOOR = 1e-12


def soft_dice(probs: torch.Tensor, one_hot: torch.Tensor, smooth: float = DICE_SMOOTH) -> torch.Tensor:
    """
    Per-class soft Dice pooled over the batch and the voxels:

        (2 Σ p_c t_c + ε) / (Σ p_c + Σ t_c + ε)

    :return: a tensor with one value per channel.
    """
    axes = (0,) + tuple(range(2, probs.dim()))
    intersection = torch.sum(probs * one_hot, dim=axes)
    total = torch.sum(probs, dim=axes) + torch.sum(one_hot, dim=axes)
    return (2.0 * intersection + smooth) / (total + smooth)


def dice_ce_loss(probs: torch.Tensor,
                 target: Union[torch.Tensor, np.ndarray],
                 smooth: float = DICE_SMOOTH) -> Tuple[torch.Tensor, torch.Tensor]:
    """
    Cross-entropy plus soft Dice:

        loss = mean_voxels(-log p_target) + (1 - mean over the foreground classes of soft Dice)

    :param probs: (batch, classes, x, y, z) per-voxel normalized probabilities.
    :param target: (batch, x, y, z) labels in [0, classes).
    :param smooth: the Dice smoothing term.
    :return: the scalar loss and the soft Dice of the foreground classes (classes 1..C-1).
    :raise ShapeError: if the shapes do not pair.
    """
    target = torch.as_tensor(target).long()
    if probs.dim() < 3 or target.dim() != probs.dim() - 1:
        raise ShapeError("Probabilities {0} and labels {1} do not pair.".format(tuple(probs.shape),
                                                                             tuple(target.shape)))
    if tuple(target.shape) != (probs.shape[0],) + tuple(probs.shape[2:]):
        mismatch = [a for a, (n, m) in enumerate(zip(target.shape[1:], probs.shape[2:])) if n != m]
        raise ShapeError("Probabilities {0} and labels {1} do not pair.".format(tuple(probs.shape),
                                                                             tuple(target.shape)),
                         axis=mismatch[0] if mismatch else None)
    num_classes = probs.shape[1]
    one_hot = torch.movedim(torch.nn.functional.one_hot(target, num_classes), -1, 1).to(probs.dtype)
    log_probs = torch.log(torch.clamp(probs, min=PROBABILITY_FLOOR))
    cross_entropy = -torch.mean(torch.sum(log_probs * one_hot, dim=1))
    dice = soft_dice(probs, one_hot, smooth)[1:]
    return cross_entropy + (1.0 - torch.mean(dice)), dice
