from typing import Dict, Sequence, Tuple, Union
import numpy as np
from scipy import ndimage
from errors import PreconditionError
from oct_types import FLUID_CLASSES
from io_data.volume import LabelMask
from evaluation.metrics import dice_score

# 26-connectivity: faces, edges and corners.
CONNECTIVITY = ndimage.generate_binary_structure(3, 3)

Policy = Dict[int, bool]


def _largest_component(binary: np.ndarray) -> np.ndarray:
    """
    :return: the boolean grid of the largest 26-connected component (the lowest label wins ties).
    """
    components, count = ndimage.label(binary, structure=CONNECTIVITY)
    if count <= 1:
        return binary
    sizes = np.bincount(components.ravel())[1:]
    return components == int(np.argmax(sizes)) + 1


def largest_components(mask: LabelMask, keep: Union[Policy, Sequence[int]]) -> LabelMask:
    """
    For each class whose policy is "suppress" (True), relabel all but its largest 26-connected
    component to background.

    :param mask: the mask.
    :param keep: the per-class policy, or the list of classes to suppress.
    :return: a new mask.
    """
    policy: Policy = dict(keep) if isinstance(keep, dict) else {int(c): True for c in keep}
    labels = mask.array.copy()
    for c, suppress in sorted(policy.items()):
        if not suppress:
            continue
        binary = labels == c
        if not binary.any():
            continue
        labels[binary & ~_largest_component(binary)] = 0
    return mask.with_array(labels)


def decide_postprocessing(val_pairs: Sequence[Tuple[LabelMask, LabelMask]],
                          classes: Sequence[int] = FLUID_CLASSES) -> Policy:
    """
    For each class, suppress iff the mean Dice over the validation pairs with suppression is at least
    the mean Dice without.

    :param val_pairs: the (prediction, ground truth) pairs.
    :param classes: the classes to decide.
    :return: the policy (True means suppress).
    :raise PreconditionError: if there is no pair.
    """
    if len(val_pairs) == 0:
        raise PreconditionError("Cannot decide the post-processing without validation pairs.")
    policy: Policy = {}
    for c in classes:
        without = [dice_score(pred, gt, c) for pred, gt in val_pairs]
        with_suppression = [dice_score(largest_components(pred, [c]), gt, c) for pred, gt in val_pairs]
        policy[int(c)] = bool(np.mean(with_suppression) >= np.mean(without))
    return policy
