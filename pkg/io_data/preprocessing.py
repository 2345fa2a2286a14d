from typing import Sequence, Union
import numpy as np
from scipy import ndimage
from errors import DomainError
from oct_types import Spacing, Shape3
from io_data.volume import Volume, LabelMask
from io_data.fingerprint import Fingerprint


def resampled_shape(shape: Sequence[int], spacing: Sequence[float], target_spacing: Sequence[float]) -> Shape3:
    """
    :return: round(shape × spacing / target_spacing) per axis, at least 1.
    """
    return tuple(max(1, int(round(n * s / t))) for n, s, t in zip(shape, spacing, target_spacing))


def _sampling_grid(old_shape: Sequence[int], new_shape: Sequence[int]) -> np.ndarray:
    """
    Coordinates, in the input grid, of the centers of the output voxels. Voxel centers are aligned
    (the output covers the same physical extent as the input) and clipped to the input grid.
    """
    axes = []
    for old, new in zip(old_shape, new_shape):
        if old == new:
            axes.append(np.arange(new, dtype=np.float64))
        else:
            axes.append(np.clip((np.arange(new, dtype=np.float64) + 0.5) * (old / new) - 0.5, 0, old - 1))
    return np.stack(np.meshgrid(*axes, indexing="ij"))


def resample_array(array: np.ndarray, new_shape: Sequence[int], order: int) -> np.ndarray:
    """
    Resample a 3D array to a new shape.
    :param array: the array.
    :param new_shape: the output shape.
    :param order: 1 for trilinear interpolation, 0 for nearest neighbor.
    :return: the resampled array, same dtype as the input.
    """
    if tuple(array.shape) == tuple(new_shape):
        return array.copy()
    coordinates = _sampling_grid(array.shape, new_shape)
    if order == 0:
        coordinates = np.floor(coordinates + 0.5)
    out = ndimage.map_coordinates(array.astype(np.float64), coordinates, order=order, mode="nearest")
    if np.issubdtype(array.dtype, np.integer):
        out = np.rint(out)
    return out.astype(array.dtype)


def resample(grid: Union[Volume, LabelMask], target_spacing: Sequence[float]) -> Union[Volume, LabelMask]:
    """
    Resample a volume (trilinear) or a mask (nearest neighbor) to a target spacing.

    :param grid: the volume or the mask.
    :param target_spacing: the target spacing, 3 positive values in millimeters.
    :return: a grid of the same kind, which spacing is the target spacing.
    :raise DomainError: if a target spacing value is not positive.
    """
    target: Spacing = tuple(float(v) for v in target_spacing)
    if len(target) != 3 or min(target) <= 0:
        raise DomainError("Target spacing must hold 3 positive values, got {0}.".format(target_spacing))
    if target == grid.spacing:
        return grid.with_array(grid.array.copy())
    new_shape = resampled_shape(grid.shape, grid.spacing, target)
    order = 0 if isinstance(grid, LabelMask) else 1
    return grid.with_array(resample_array(grid.array, new_shape, order), spacing=target)


def normalize(volume: Volume, fingerprint: Fingerprint) -> Volume:
    """
    Clip the intensities to the fingerprint [0.5, 99.5] percentiles, then z-score them with the
    fingerprint mean and standard deviation (a zero deviation only subtracts the mean).

    :param volume: the volume.
    :param fingerprint: the dataset fingerprint.
    :return: the normalized volume (float32).
    """
    stats = fingerprint.intensity_stats
    if stats.std < 0:
        raise DomainError("Negative standard deviation {0}.".format(stats.std))
    values = np.clip(volume.array.astype(np.float64), stats.percentile_00_5, stats.percentile_99_5) - stats.mean
    if stats.std > 0:
        values /= stats.std
    return volume.with_array(values.astype(np.float32))
