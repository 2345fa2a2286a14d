from typing import List, Dict, Any, Sequence, Tuple, Optional
import numpy as np
from errors import PreconditionError
from loggable import Loggable
from oct_types import Spacing, Shape3, FLUID_CLASSES
from io_data.volume import Volume, LabelMask
from io_data.dataset_index import DatasetIndex


class IntensityStats:

    def __init__(self, mean: float, std: float, percentile_00_5: float, percentile_99_5: float):
        self.__mean = float(mean)
        self.__std = float(std)
        self.__percentile_00_5 = float(percentile_00_5)
        self.__percentile_99_5 = float(percentile_99_5)

    @property
    def mean(self) -> float:
        return self.__mean

    @property
    def std(self) -> float:
        return self.__std

    @property
    def percentile_00_5(self) -> float:
        return self.__percentile_00_5

    @property
    def percentile_99_5(self) -> float:
        return self.__percentile_99_5

    def to_dict(self) -> Dict[str, float]:
        return {'mean': self.__mean, 'std': self.__std,
                'percentile_00_5': self.__percentile_00_5, 'percentile_99_5': self.__percentile_99_5}

    @staticmethod
    def from_dict(d: Dict[str, float]) -> "IntensityStats":
        return IntensityStats(d['mean'], d['std'], d['percentile_00_5'], d['percentile_99_5'])


class Fingerprint(Loggable):
    """
    The dataset-level summary that drives the planner: shapes, spacings, foreground intensity
    statistics and class presence of the training volumes.
    """

    def __init__(self,
                 shapes: Sequence[Shape3],
                 spacings: Sequence[Spacing],
                 intensity_stats: IntensityStats,
                 class_presence: Dict[int, float],
                 modality: str = "OCT"):
        if len(shapes) != len(spacings):
            raise PreconditionError("{0:d} shapes for {1:d} spacings.".format(len(shapes), len(spacings)))
        self.__shapes: Tuple[Shape3, ...] = tuple(tuple(int(v) for v in s) for s in shapes)
        self.__spacings: Tuple[Spacing, ...] = tuple(tuple(float(v) for v in s) for s in spacings)
        self.__intensity_stats = intensity_stats
        self.__class_presence: Dict[int, float] = {int(k): float(v) for k, v in class_presence.items()}
        self.__modality = modality

    @property
    def shapes(self) -> Tuple[Shape3, ...]:
        return self.__shapes

    @property
    def spacings(self) -> Tuple[Spacing, ...]:
        return self.__spacings

    @property
    def intensity_stats(self) -> IntensityStats:
        return self.__intensity_stats

    @property
    def num_volumes(self) -> int:
        return len(self.__shapes)

    @property
    def class_presence(self) -> Dict[int, float]:
        return dict(self.__class_presence)

    @property
    def modality(self) -> str:
        return self.__modality

    @property
    def median_spacing(self) -> Spacing:
        return tuple(float(v) for v in np.median(np.array(self.__spacings), axis=0))

    @property
    def median_shape(self) -> Tuple[float, float, float]:
        return tuple(float(v) for v in np.median(np.array(self.__shapes), axis=0))

    def to_dict(self) -> Dict[str, Any]:
        return {
            'log-type': 'fingerprint',
            'modality': self.__modality,
            'num_volumes': self.num_volumes,
            'shapes': [list(s) for s in self.__shapes],
            'spacings': [list(s) for s in self.__spacings],
            'intensity_stats': self.__intensity_stats.to_dict(),
            'class_presence': {str(k): v for k, v in sorted(self.__class_presence.items())}
        }

    @staticmethod
    def from_dict(d: Dict[str, Any]) -> "Fingerprint":
        return Fingerprint([tuple(s) for s in d['shapes']],
                           [tuple(s) for s in d['spacings']],
                           IntensityStats.from_dict(d['intensity_stats']),
                           {int(k): v for k, v in d['class_presence'].items()},
                           d.get('modality', "OCT"))


def fingerprint_from_pairs(pairs: Sequence[Tuple[Volume, Optional[LabelMask]]]) -> Fingerprint:
    """
    Compute the fingerprint of in-memory (volume, mask) pairs.

    Foreground voxels are the voxels where the mask is not 0; a pair without mask contributes all
    its voxels. Foreground values are pooled and sorted before the statistics are computed, so that
    the statistics do not depend on the order of the pairs.

    :param pairs: the training pairs, in index order.
    :return: the fingerprint.
    :raise PreconditionError: if there is no pair.
    """
    if len(pairs) == 0:
        raise PreconditionError("Cannot extract a fingerprint from an empty training set.")
    chunks: List[np.ndarray] = []
    presence: Dict[int, int] = {int(c): 0 for c in FLUID_CLASSES}
    for volume, mask in pairs:
        values = volume.array.astype(np.float64)
        if mask is None:
            chunks.append(values.ravel())
            continue
        mask.check_pairs_with(volume)
        chunks.append(values[mask.array != 0])
        present = set(mask.labels())
        for c in presence:
            presence[c] += int(c in present)
    pooled = np.sort(np.concatenate(chunks))
    if pooled.size == 0:
        # No foreground at all: fall back to every voxel.
        pooled = np.sort(np.concatenate([v.array.astype(np.float64).ravel() for v, _ in pairs]))
    p_low, p_high = np.percentile(pooled, [0.5, 99.5])
    mean = float(np.mean(pooled))
    stats = IntensityStats(mean, float(np.std(pooled)), min(float(p_low), mean), max(float(p_high), mean))
    return Fingerprint([v.shape for v, _ in pairs],
                       [v.spacing for v, _ in pairs],
                       stats,
                       {c: n / len(pairs) for c, n in presence.items()})


def extract_fingerprint(index: DatasetIndex) -> Fingerprint:
    """
    Extract the fingerprint of the training entries of a dataset index.
    :param index: the dataset index.
    :return: the fingerprint; shapes and spacings enumerate the training volumes in index order.
    :raise PreconditionError: if the index has no training entry.
    """
    entries = index.train_entries()
    if len(entries) == 0:
        raise PreconditionError("The index holds no training entry.")
    return fingerprint_from_pairs([index.load_pair(e) for e in entries])
