from collections import deque
import itertools
import numpy as np
import pytest
from errors import PreconditionError
from io_data.volume import LabelMask
from evaluation.postprocessing import largest_components, decide_postprocessing

NEIGHBOURS = [d for d in itertools.product((-1, 0, 1), repeat=3) if d != (0, 0, 0)]


def _components(binary: np.ndarray):
    seen = np.zeros(binary.shape, dtype=bool)
    found = []
    for start in map(tuple, np.argwhere(binary)):
        if seen[start]:
            continue
        seen[start] = True
        queue = deque([start])
        component = set()
        while queue:
            voxel = queue.popleft()
            component.add(voxel)
            for d in NEIGHBOURS:
                n = tuple(v + o for v, o in zip(voxel, d))
                if all(0 <= a < s for a, s in zip(n, binary.shape)) and binary[n] and not seen[n]:
                    seen[n] = True
                    queue.append(n)
        found.append(component)
    return found


def test_largest_component_matches_a_flood_fill(rng):
    for _ in range(30):
        labels = np.where(rng.random((7, 6, 5)) < 0.08, rng.integers(1, 4, size=(7, 6, 5)), 0).astype(np.uint8)
        mask = LabelMask(labels)
        kept = largest_components(mask, [1, 2, 3]).array
        for c in (1, 2, 3):
            components = _components(labels == c)
            if not components:
                assert not (kept == c).any()
                continue
            largest = max(len(k) for k in components)
            survivors = {tuple(v) for v in np.argwhere(kept == c)}
            assert survivors in [k for k in components if len(k) == largest]
        # suppressed voxels become background, nothing else changes
        assert np.all((kept == labels) | (kept == 0))
        again = largest_components(LabelMask(kept), [1, 2, 3]).array
        assert np.array_equal(again, kept)
        assert set(np.unique(kept)) <= set(np.unique(labels))
        assert all((kept == c).any() == (labels == c).any() for c in (1, 2, 3))


def test_policy_leaves_other_classes_alone():
    labels = np.zeros((9, 9, 3), dtype=np.uint8)
    labels[0, 0, 0] = 1
    labels[5:8, 5:8, 1] = 1
    labels[0, 8, 0] = 2
    labels[8, 0, 2] = 2
    kept = largest_components(LabelMask(labels), {1: True, 2: False}).array
    assert kept[0, 0, 0] == 0
    assert (kept == 1).sum() == 9
    assert (kept == 2).sum() == 2


def test_suppression_is_chosen_when_it_helps():
    gt = np.zeros((10, 10, 4), dtype=np.uint8)
    gt[2:6, 2:6, 1:3] = 1
    gt[1:3, 1:3, 0:2] = 2
    gt[7:9, 7:9, 2:4] = 2
    spurious = gt.copy()
    spurious[9, 0, 0] = 1
    pairs = [(LabelMask(spurious), LabelMask(gt))]
    policy = decide_postprocessing(pairs)
    assert policy[1] is True
    # two true PED blobs: keeping only one lowers the Dice
    assert policy[2] is False
    assert policy[3] is True
    with pytest.raises(PreconditionError):
        decide_postprocessing([])


def test_suppression_keeps_the_size_ten_blob_and_is_idempotent():
    labels = np.zeros((8, 8, 4), dtype=np.uint8)
    labels[0:5, 0:2, 0] = 3
    labels[6:8, 6, 3] = 3
    labels[7, 5, 3] = 3
    once = largest_components(LabelMask(labels), {3: True})
    assert (once.array == 3).sum() == 10
    assert (once.array[0:5, 0:2, 0] == 3).all()
    twice = largest_components(once, {3: True})
    assert np.array_equal(twice.array, once.array)
    single = labels.copy()
    single[6:8, 5:8, 3] = 0
    assert np.array_equal(largest_components(LabelMask(single), {3: True}).array, single)
