from typing import Any, List, Sequence, Tuple, Union
import numpy as np
from sklearn import metrics
from errors import ShapeError, DomainError, UndefinedAucError
from loggable import Loggable
from io_data.volume import LabelMask

DETECTION_PERCENTILE = 99.5
# The "volume" reducer saturates at this number of voxels predicted as the class.
DETECTION_VOLUME_VOXELS = 100
REDUCERS = ("percentile", "max", "volume")

MaskLike = Union[LabelMask, np.ndarray]


def _labels(mask: MaskLike) -> np.ndarray:
    return mask.array if isinstance(mask, LabelMask) else np.asarray(mask)


def _check_pair(pred: np.ndarray, gt: np.ndarray) -> None:
    if pred.shape != gt.shape:
        axes = [a for a, (n, m) in enumerate(zip(pred.shape, gt.shape)) if n != m]
        raise ShapeError("Masks {0} and {1} do not pair.".format(pred.shape, gt.shape),
                         axis=axes[0] if axes else None)


def dice_score(pred: MaskLike, gt: MaskLike, c: int) -> float:
    """
    2 |X ∩ Y| / (|X| + |Y|) with X = {pred == c} and Y = {gt == c}; 1.0 when both are empty.

    :raise ShapeError: if the dims differ.
    """
    p, g = _labels(pred), _labels(gt)
    _check_pair(p, g)
    x = p == c
    y = g == c
    total = int(np.count_nonzero(x)) + int(np.count_nonzero(y))
    if total == 0:
        return 1.0
    return 2.0 * int(np.count_nonzero(x & y)) / total


def avd(pred: MaskLike, gt: MaskLike, c: int, spacing: Sequence[float]) -> float:
    """
    Absolute volume difference: |count(pred == c) - count(gt == c)| × voxel volume, in mm³.

    :raise ShapeError: if the dims differ.
    :raise DomainError: if a spacing value is not positive.
    """
    p, g = _labels(pred), _labels(gt)
    _check_pair(p, g)
    if len(spacing) != 3 or min(spacing) <= 0:
        raise DomainError("Spacing must hold 3 positive values, got {0}.".format(spacing))
    voxel = float(spacing[0]) * float(spacing[1]) * float(spacing[2])
    return abs(int(np.count_nonzero(p == c)) - int(np.count_nonzero(g == c))) * voxel


def mm3_to_ml(value: float) -> float:
    return value / 1000.0


def detection_score(prob: Any, c: int, reducer: str = "percentile") -> float:
    """
    Reduce the class-c probability channel of a volume to a presence score in [0, 1].

    :param prob: a ProbabilityMap or a (classes, x, y, z) array.
    :param c: the class.
    :param reducer: "percentile" (99.5th percentile of the channel), "max" (maximal value) or
    "volume" (number of voxels where c is the most probable class, divided by 100, capped at 1).
    :return: the score.
    """
    probs = prob.probs if hasattr(prob, "probs") else np.asarray(prob)
    channel = probs[c].astype(np.float64)
    if reducer == "percentile":
        score = float(np.percentile(channel, DETECTION_PERCENTILE))
    elif reducer == "max":
        score = float(np.max(channel))
    elif reducer == "volume":
        count = int(np.count_nonzero(np.argmax(probs, axis=0) == c))
        score = min(1.0, count / DETECTION_VOLUME_VOXELS)
    else:
        raise DomainError('Unknown detection reducer "{0}" (expected one of {1}).'.format(reducer,
                                                                                        ", ".join(REDUCERS)))
    return min(1.0, max(0.0, score))


class DetectionRecord(Loggable):

    def __init__(self, volume: str, c: int, score: float, truth: int, vendor: str = ""):
        if not np.isfinite(score):
            raise DomainError("Detection score must be finite, got {0}.".format(score))
        if truth not in (0, 1):
            raise DomainError("Detection truth must be 0 or 1, got {0}.".format(truth))
        self.__volume = volume
        self.__class = int(c)
        self.__score = float(score)
        self.__truth = int(truth)
        self.__vendor = vendor

    @property
    def volume(self) -> str:
        return self.__volume

    @property
    def label(self) -> int:
        return self.__class

    @property
    def score(self) -> float:
        return self.__score

    @property
    def truth(self) -> int:
        return self.__truth

    @property
    def vendor(self) -> str:
        return self.__vendor

    def to_dict(self):
        return {'log-type': 'detection', 'volume': self.__volume, 'class': self.__class, 'score': self.__score,
                'truth': self.__truth, 'vendor': self.__vendor}


def _scores(records: Sequence[DetectionRecord]) -> Tuple[np.ndarray, np.ndarray]:
    truths = np.array([r.truth for r in records], dtype=np.int64)
    scores = np.array([r.score for r in records], dtype=np.float64)
    if len(records) == 0 or truths.min() == truths.max():
        raise UndefinedAucError("The AUC needs at least one positive and one negative record.")
    return truths, scores


def roc_curve_points(records: Sequence[DetectionRecord]) -> List[Tuple[float, float, float]]:
    """
    :return: the (threshold, fpr, tpr) points of the full threshold sweep.
    :raise UndefinedAucError: if the truths hold a single class.
    """
    truths, scores = _scores(records)
    fpr, tpr, thresholds = metrics.roc_curve(truths, scores, drop_intermediate=False)
    return [(float(t), float(f), float(p)) for t, f, p in zip(thresholds, fpr, tpr)]


def roc_auc(records: Sequence[DetectionRecord]) -> float:
    """
    Area under the ROC curve by trapezoidal integration over the full threshold sweep. Ties between
    a positive and a negative count one half.

    :raise UndefinedAucError: if the truths hold a single class.
    """
    truths, scores = _scores(records)
    fpr, tpr, _ = metrics.roc_curve(truths, scores, drop_intermediate=False)
    return float(metrics.auc(fpr, tpr))
