import numpy as np
import pytest
from errors import ShapeError, DomainError, UndefinedAucError
from io_data.volume import LabelMask
from evaluation.metrics import dice_score, avd, mm3_to_ml, detection_score, DetectionRecord, roc_auc, \
    roc_curve_points
from conftest import random_mask


def _set_dice(pred: np.ndarray, gt: np.ndarray, c: int) -> float:
    x = {tuple(v) for v in np.argwhere(pred == c)}
    y = {tuple(v) for v in np.argwhere(gt == c)}
    if not x and not y:
        return 1.0
    return 2.0 * len(x & y) / (len(x) + len(y))


def _pairwise_auc(records) -> float:
    positives = [r.score for r in records if r.truth == 1]
    negatives = [r.score for r in records if r.truth == 0]
    wins = sum(1.0 if p > n else 0.5 if p == n else 0.0 for p in positives for n in negatives)
    return wins / (len(positives) * len(negatives))


def test_dice_and_volume_difference_match_set_counts(rng):
    for _ in range(1000):
        pred = random_mask(rng, max_edge=6)
        gt = random_mask(rng, pred.shape)
        spacing = tuple(rng.uniform(0.01, 0.2, size=3))
        for c in (1, 2, 3):
            assert dice_score(pred, gt, c) == pytest.approx(_set_dice(pred, gt, c), abs=1e-12)
            expected = abs(int((pred == c).sum()) - int((gt == c).sum())) * np.prod(spacing)
            assert avd(pred, gt, c, spacing) == pytest.approx(expected, rel=1e-12)


def test_metric_edge_cases():
    empty = LabelMask(np.zeros((3, 3, 3), dtype=np.uint8))
    assert dice_score(empty, empty, 2) == 1.0
    assert avd(empty, empty, 2, (1.0, 1.0, 1.0)) == 0.0
    with pytest.raises(ShapeError) as info:
        dice_score(np.zeros((3, 3, 3)), np.zeros((3, 4, 3)), 1)
    assert info.value.axis == 1
    with pytest.raises(DomainError):
        avd(empty, empty, 1, (1.0, 0.0, 1.0))
    assert mm3_to_ml(1500.0) == 1.5


def test_auc_matches_pairwise_ordering(rng):
    for _ in range(200):
        n = int(rng.integers(2, 61))
        truths = rng.integers(0, 2, size=n)
        truths[0], truths[1] = 0, 1
        scores = np.round(rng.uniform(0.0, 1.0, size=n), 1)
        records = [DetectionRecord("v{0}".format(i), 1, s, int(t)) for i, (s, t) in enumerate(zip(scores, truths))]
        value = roc_auc(records)
        assert value == pytest.approx(_pairwise_auc(records), abs=1e-12)
        cubed = [DetectionRecord(r.volume, 1, r.score ** 3, r.truth) for r in records]
        assert roc_auc(cubed) == value


def test_auc_needs_both_truths():
    records = [DetectionRecord("a", 1, 0.3, 1), DetectionRecord("b", 1, 0.8, 1)]
    with pytest.raises(UndefinedAucError):
        roc_auc(records)
    with pytest.raises(UndefinedAucError):
        roc_auc([])


def test_roc_points_sweep_every_threshold():
    records = [DetectionRecord("a", 1, 0.9, 1), DetectionRecord("b", 1, 0.4, 0), DetectionRecord("c", 1, 0.6, 1)]
    points = roc_curve_points(records)
    assert points[-1][1:] == (1.0, 1.0)
    assert [p[1:] for p in points[1:]] == [(0.0, 0.5), (0.0, 1.0), (1.0, 1.0)]
    assert roc_auc(records) == 1.0


def test_detection_reducers():
    probs = np.zeros((4, 10, 10, 2))
    probs[0] = 1.0
    probs[2, :5, :5, :] = 0.8
    probs[0, :5, :5, :] = 0.2
    assert detection_score(probs, 2, "max") == pytest.approx(0.8)
    assert detection_score(probs, 2, "volume") == pytest.approx(0.5)
    assert detection_score(probs, 2, "percentile") == pytest.approx(0.8)
    assert detection_score(probs, 3) == 0.0
    with pytest.raises(DomainError):
        detection_score(probs, 2, "mean")


def test_detection_records_are_validated():
    with pytest.raises(DomainError):
        DetectionRecord("a", 1, float("nan"), 1)
    with pytest.raises(DomainError):
        DetectionRecord("a", 1, 0.5, 2)
