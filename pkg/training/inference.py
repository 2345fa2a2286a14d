"""
Whole-volume inference by sliding window.

The volume is normalized with the checkpoint fingerprint and resampled to the plan spacing. Windows
of the patch size are laid at (at most) 50% overlap; the last window of each axis is flush with the
border. Window probabilities are blended with a Gaussian importance map (sigma = patch / 8) that
favours window centers. Volumes smaller than the patch are padded symmetrically and cropped back.
The blended probabilities are finally resampled to the native grid and renormalized per voxel.
"""

from typing import Callable, Dict, List, Optional, Sequence, Tuple
import numpy as np
import torch
from scipy.ndimage import gaussian_filter
from errors import PreconditionError, ShapeError
from oct_types import Spacing, FLUID_CLASSES, CLASS_NAMES
from io_data.volume import Volume, LabelMask
from io_data.preprocessing import normalize, resample, resample_array
from network.parameters import forward
from training.sampler import pad_to
from training.checkpoint import Checkpoint

Predictor = Callable[[np.ndarray], np.ndarray]


class ProbabilityMap:
    """
    Per-voxel class probabilities (classes, x, y, z) on the grid of a volume.
    """

    def __init__(self, probs: np.ndarray, spacing: Spacing = (1.0, 1.0, 1.0),
                 origin: Tuple[float, float, float] = (0.0, 0.0, 0.0), meta: Optional[Dict[str, str]] = None):
        if probs.ndim != 4:
            raise ShapeError("A probability map is (classes, x, y, z), got {0}.".format(probs.shape))
        self.__probs = probs.astype(np.float32, copy=False)
        self.__spacing = tuple(float(v) for v in spacing)
        self.__origin = tuple(float(v) for v in origin)
        self.__meta = dict(meta or {})

    @property
    def probs(self) -> np.ndarray:
        return self.__probs

    @property
    def num_classes(self) -> int:
        return self.__probs.shape[0]

    @property
    def shape(self) -> Tuple[int, int, int]:
        return tuple(self.__probs.shape[1:])

    @property
    def spacing(self) -> Spacing:
        return self.__spacing

    @property
    def origin(self) -> Tuple[float, float, float]:
        return self.__origin

    @property
    def meta(self) -> Dict[str, str]:
        return dict(self.__meta)

    def channel(self, c: int) -> np.ndarray:
        return self.__probs[c]

    def argmax(self) -> LabelMask:
        return LabelMask(np.argmax(self.__probs, axis=0).astype(np.uint8), self.__spacing, self.__origin, self.__meta)

    def class_volumes(self) -> Dict[str, Volume]:
        """
        :return: one float32 volume per fluid class, keyed by class name (for MetaImage output).
        """
        return {CLASS_NAMES[c]: Volume(self.__probs[c].copy(), self.__spacing, self.__origin, self.__meta)
                for c in FLUID_CLASSES if c < self.num_classes}


def gaussian_importance_map(patch: Sequence[int], sigma_scale: float = 1.0 / 8.0) -> np.ndarray:
    """
    A unit impulse at the patch center smoothed by a Gaussian of sigma = patch × sigma_scale, scaled
    to a maximum of 1. Zero values are replaced by the smallest positive value.
    """
    impulse = np.zeros(tuple(patch), dtype=np.float64)
    impulse[tuple(n // 2 for n in patch)] = 1.0
    weights = gaussian_filter(impulse, [n * sigma_scale for n in patch], 0, mode="constant", cval=0)
    weights = weights / np.max(weights)
    weights[weights == 0] = np.min(weights[weights != 0])
    return weights


def sliding_window_steps(patch: Sequence[int], image_size: Sequence[int], step_size: float = 0.5) -> List[List[int]]:
    """
    :return: per axis, the window start coordinates: ceil((size - patch) / (patch × step)) + 1 windows
    evenly spread between 0 and size - patch.
    """
    if not 0 < step_size <= 1:
        raise PreconditionError("step_size must be in (0, 1], got {0}.".format(step_size))
    steps: List[List[int]] = []
    for p, n in zip(patch, image_size):
        if n < p:
            raise ShapeError("Image axis ({0:d}) smaller than the patch ({1:d}).".format(n, p))
        count = int(np.ceil((n - p) / (p * step_size))) + 1
        if count == 1:
            steps.append([0])
            continue
        stride = (n - p) / (count - 1)
        steps.append([int(np.round(stride * i)) for i in range(count)])
    return steps


def _windows(patch: Sequence[int], image_size: Sequence[int], step_size: float) -> List[Tuple[slice, ...]]:
    xs, ys, zs = sliding_window_steps(patch, image_size, step_size)
    return [(slice(x, x + patch[0]), slice(y, y + patch[1]), slice(z, z + patch[2]))
            for x in xs for y in ys for z in zs]


def window_weights(image_size: Sequence[int], patch: Sequence[int], step_size: float = 0.5,
                   use_gaussian: bool = True) -> List[Tuple[Tuple[slice, ...], np.ndarray]]:
    """
    :return: the windows with their blending weights, already divided by the accumulated weights:
    at every voxel, the weights of the covering windows sum to 1.
    """
    windows = _windows(patch, image_size, step_size)
    importance = gaussian_importance_map(patch) if use_gaussian and len(windows) > 1 else np.ones(tuple(patch))
    total = np.zeros(tuple(image_size), dtype=np.float64)
    for window in windows:
        total[window] += importance
    return [(window, importance / total[window]) for window in windows]


def sliding_window_predict(image: np.ndarray,
                           predictor: Predictor,
                           patch: Sequence[int],
                           num_classes: int,
                           step_size: float = 0.5,
                           use_gaussian: bool = True) -> np.ndarray:
    """
    Blend windowed predictions over an image.

    :param image: the (x, y, z) image in network space.
    :param predictor: maps a (1, 1, patch) batch to (1, classes, patch) probabilities.
    :param patch: the window size.
    :param num_classes: the number of classes.
    :param step_size: the step between windows, as a fraction of the patch.
    :param use_gaussian: blend with the Gaussian importance map (uniform weights otherwise).
    :return: (classes, x, y, z) probabilities.
    """
    padded, crop = pad_to(image, patch)
    windows = _windows(patch, padded.shape, step_size)
    importance = gaussian_importance_map(patch) if use_gaussian and len(windows) > 1 else np.ones(tuple(patch))
    accumulated = np.zeros((num_classes,) + padded.shape, dtype=np.float64)
    total = np.zeros(padded.shape, dtype=np.float64)
    for window in windows:
        batch = padded[window][None, None].astype(np.float32)
        probs = np.asarray(predictor(batch), dtype=np.float64)[0]
        accumulated[(slice(None),) + window] += probs * importance
        total[window] += importance
    blended = accumulated / total[None]
    return blended[(slice(None),) + crop]


def network_predictor(checkpoint: Checkpoint) -> Predictor:
    spec = checkpoint.spec
    params = checkpoint.parameters

    def predict(batch: np.ndarray) -> np.ndarray:
        with torch.no_grad():
            return forward(spec, params, torch.from_numpy(batch)).numpy()

    return predict


def renormalize(probs: np.ndarray) -> np.ndarray:
    probs = np.clip(probs, 0.0, None)
    total = np.sum(probs, axis=0, keepdims=True)
    total[total == 0] = 1.0
    return probs / total


def predict_volume(checkpoint: Checkpoint, volume: Volume, predictor: Optional[Predictor] = None,
                   step_size: float = 0.5) -> ProbabilityMap:
    """
    Predict the class probabilities of a volume.

    :param checkpoint: the trained network, its plan and its fingerprint.
    :param volume: the volume, on its native grid.
    :param predictor: replaces the network (for example a stub returning constant probabilities).
    :param step_size: the step between windows, as a fraction of the patch.
    :return: the probability map on the native grid of the volume.
    :raise PreconditionError: if the checkpoint carries no fingerprint.
    """
    if checkpoint.fingerprint is None:
        raise PreconditionError("The checkpoint carries no fingerprint: cannot normalize the volume.")
    plan = checkpoint.plan
    num_classes = checkpoint.spec.num_classes
    image = resample(normalize(volume, checkpoint.fingerprint), plan.target_spacing).array
    probs = sliding_window_predict(image, predictor or network_predictor(checkpoint), plan.patch_size,
                                   num_classes, step_size)
    if tuple(probs.shape[1:]) != volume.shape:
        probs = np.stack([resample_array(p, volume.shape, order=1) for p in probs])
    return ProbabilityMap(renormalize(probs).astype(np.float32), volume.spacing, volume.origin, volume.meta)
