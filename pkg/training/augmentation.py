from typing import Tuple, Sequence
import math
import numpy as np
from scipy import ndimage
from errors import ShapeError
from training.configs import AugmentationConfig


def mirror(volume: np.ndarray, mask: np.ndarray, axes: Sequence[int]) -> Tuple[np.ndarray, np.ndarray]:
    for axis in axes:
        volume = np.flip(volume, axis=axis)
        mask = np.flip(mask, axis=axis)
    return np.ascontiguousarray(volume), np.ascontiguousarray(mask)


def _affine(shape: Sequence[int], angle: float, scale: float) -> Tuple[np.ndarray, np.ndarray]:
    """
    :return: the (matrix, offset) pair that maps output coordinates to input coordinates for a
    rotation in the (x, y) plane and an isotropic scaling, both about the patch center.
    """
    c, s = math.cos(angle), math.sin(angle)
    rotation = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    matrix = rotation / scale
    center = (np.array(shape, dtype=np.float64) - 1.0) / 2.0
    return matrix, center - matrix @ center


def spatial_transform(volume: np.ndarray, mask: np.ndarray, angle: float, scale: float) \
        -> Tuple[np.ndarray, np.ndarray]:
    """
    Apply the same rotation/scaling to both grids: trilinear for the volume, nearest neighbor for the mask.
    """
    matrix, offset = _affine(volume.shape, angle, scale)
    out_volume = ndimage.affine_transform(volume.astype(np.float64), matrix, offset, order=1, mode="nearest")
    out_mask = ndimage.affine_transform(mask, matrix, offset, order=0, mode="constant", cval=0)
    return out_volume.astype(volume.dtype), out_mask.astype(mask.dtype)


def gamma_transform(volume: np.ndarray, gamma: float) -> np.ndarray:
    """
    Rescale to [0, 1], raise to the power gamma, rescale back to the original range.
    """
    low, high = float(np.min(volume)), float(np.max(volume))
    if high <= low:
        return volume.copy()
    unit = (volume.astype(np.float64) - low) / (high - low)
    return (np.power(unit, gamma) * (high - low) + low).astype(volume.dtype)


def augment(volume: np.ndarray,
            mask: np.ndarray,
            cfg: AugmentationConfig,
            draw: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    """
    Augment a (volume, mask) patch pair.

    Geometric transforms (mirror, rotation, scaling) are applied to both grids, intensity transforms
    (noise, gamma) to the volume only. Random draws are made in a fixed order from "draw", so the
    result is a pure function of (inputs, cfg, generator state). With every transform disabled the
    inputs are returned untouched.

    :param volume: the volume patch.
    :param mask: the mask patch.
    :param cfg: the augmentation configuration.
    :param draw: the random generator.
    :return: the augmented (volume, mask) pair.
    :raise ShapeError: if the shapes do not pair.
    """
    if volume.shape != mask.shape:
        raise ShapeError("Volume patch {0} and mask patch {1} do not pair.".format(volume.shape, mask.shape))

    if cfg.mirror:
        axes = [a for a in cfg.mirror_axes if draw.random() < cfg.mirror_probability]
        if axes:
            volume, mask = mirror(volume, mask, axes)

    angle = 0.0
    scale = 1.0
    if cfg.rotation and draw.random() < cfg.rotation_probability:
        angle = math.radians(draw.uniform(-cfg.rotation_degrees, cfg.rotation_degrees))
    if cfg.scaling and draw.random() < cfg.scaling_probability:
        scale = float(draw.uniform(*cfg.scale_range))
    if angle != 0.0 or scale != 1.0:
        volume, mask = spatial_transform(volume, mask, angle, scale)

    if cfg.noise and draw.random() < cfg.noise_probability:
        sigma = draw.uniform(0.0, cfg.noise_sigma)
        volume = (volume + draw.normal(0.0, sigma, size=volume.shape)).astype(volume.dtype)
    if cfg.gamma and draw.random() < cfg.gamma_probability:
        volume = gamma_transform(volume, float(draw.uniform(*cfg.gamma_range)))
    return volume, mask
