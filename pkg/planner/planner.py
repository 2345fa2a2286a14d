"""
Self-configuration: map a dataset fingerprint and a memory budget to a plan.

Procedure:

    1. target spacing  = per-axis median of the training spacings;
    2. median shape    = per-axis median of the training shapes once resampled to the target spacing;
    3. patch           = grown from a minimal cube (16 voxels per axis, or the median shape when it is
                         smaller) toward the median shape. At each step the axis with the largest
                         remaining (median / patch) ratio doubles (capped at the median); ties go to the
                         lowest axis index. Growth stops at the first step that does not fit the budget
                         with a batch of 2;
    4. pools per axis  = halvings until the patch axis is <= 8 voxels, at most 5;
    5. the patch is rounded down to a multiple of 2^pools on each axis;
    6. batch size      = the largest batch >= 2 that fits the budget (optionally capped so that a batch
                         covers at most a fraction of the dataset voxels).

A 2D plan (one B-scan per patch) forces the z axis to 1 voxel and 0 pools.
"""

from typing import Sequence, Tuple, Optional, List
import math
import numpy as np
from errors import InfeasibleBudgetError, PreconditionError, DomainError
from oct_types import Shape3
from io_data.fingerprint import Fingerprint
from io_data.preprocessing import resampled_shape
from planner.plan_config import PlanConfig, MemoryBudget, MAX_POOLS, patch_voxels, stage_shape

MIN_PATCH = 16
BOTTLENECK_EDGE = 8
MIN_BATCH = 2


def estimate_cost(patch: Sequence[int],
                  base_features: int,
                  pools: Sequence[int],
                  batch: int,
                  budget: MemoryBudget,
                  max_features: int = 320) -> float:
    """
    Estimate the activation memory of one training step:

        batch × bytes_per_voxel_feature × 2 × Σ_level voxels(level) × width(level)

    where the levels are 0..max(pools), voxels(level) is the patch volume once each axis has been halved
    min(level, pools[axis]) times and width(level) = min(base_features × 2^level, max_features). The factor 2
    counts the encoder and the decoder once each.

    :return: the estimated number of bytes.
    """
    total = 0
    for level in range(max(pools) + 1 if len(pools) else 1):
        total += patch_voxels(stage_shape(patch, pools, level)) * min(base_features * 2 ** level, max_features)
    return float(batch) * budget.bytes_per_voxel_feature * 2.0 * total


def pools_for(patch: Sequence[int]) -> Shape3:
    """
    :return: for each axis, the number of halvings until the axis is <= 8 voxels, at most 5.
    """
    pools = []
    for n in patch:
        p = 0
        size = float(n)
        while size > BOTTLENECK_EDGE and p < MAX_POOLS:
            size /= 2.0
            p += 1
        pools.append(p)
    return tuple(pools)


def round_to_pools(patch: Sequence[int], pools: Sequence[int]) -> Shape3:
    return tuple(max(2 ** p, (int(n) // 2 ** p) * 2 ** p) for n, p in zip(patch, pools))


def target_median_shape(fingerprint: Fingerprint, target_spacing: Sequence[float]) -> Shape3:
    resampled = [resampled_shape(shape, spacing, target_spacing)
                 for shape, spacing in zip(fingerprint.shapes, fingerprint.spacings)]
    return tuple(max(1, int(round(float(v)))) for v in np.median(np.array(resampled, dtype=np.float64), axis=0))


def _next_growth(patch: List[int], median: Shape3, axes: Sequence[int]) -> Optional[int]:
    best: Optional[int] = None
    best_ratio = 1.0
    for axis in axes:
        ratio = median[axis] / patch[axis]
        if ratio > best_ratio:
            best, best_ratio = axis, ratio
    return best


def _fits(patch: Sequence[int], base_features: int, max_features: int, budget: MemoryBudget, batch: int) -> bool:
    pools = pools_for(patch)
    rounded = round_to_pools(patch, pools)
    return estimate_cost(rounded, base_features, pools, batch, budget, max_features) <= budget.bytes_available


def make_plan(fingerprint: Fingerprint,
              budget: MemoryBudget,
              base_features: int = 32,
              max_features: int = 320,
              dimensionality: int = 3,
              max_dataset_fraction: Optional[float] = None) -> PlanConfig:
    """
    Compute the plan of a dataset.

    :param fingerprint: the dataset fingerprint.
    :param budget: the memory budget.
    :param base_features: the feature width of the first stage.
    :param max_features: the maximal feature width.
    :param dimensionality: 3 (volumetric patches) or 2 (one B-scan per patch).
    :param max_dataset_fraction: if set, the batch is capped so that batch × patch voxels does not exceed
    this fraction of the dataset voxels (never below 2).
    :return: the plan.
    :raise PreconditionError: if the fingerprint holds no shape.
    :raise InfeasibleBudgetError: if even the minimal patch with a batch of 2 exceeds the budget.
    """
    if fingerprint.num_volumes == 0:
        raise PreconditionError("The fingerprint holds no volume.")
    if dimensionality not in (2, 3):
        raise DomainError("Dimensionality must be 2 or 3, got {0}.".format(dimensionality))
    target_spacing = fingerprint.median_spacing
    median = target_median_shape(fingerprint, target_spacing)
    growable = (0, 1, 2) if dimensionality == 3 else (0, 1)

    patch = [min(MIN_PATCH, m) for m in median]
    if dimensionality == 2:
        patch[2] = 1
    if not _fits(patch, base_features, max_features, budget, MIN_BATCH):
        raise InfeasibleBudgetError("A budget of {0:d} bytes cannot hold the minimal patch {1} with a batch of {2:d}."
                                    .format(budget.bytes_available, tuple(patch), MIN_BATCH))
    while True:
        axis = _next_growth(patch, median, growable)
        if axis is None:
            break
        candidate = list(patch)
        candidate[axis] = min(2 * patch[axis], median[axis])
        if not _fits(candidate, base_features, max_features, budget, MIN_BATCH):
            break
        patch = candidate

    pools = pools_for(patch)
    rounded = round_to_pools(patch, pools)
    one = estimate_cost(rounded, base_features, pools, 1, budget, max_features)
    batch = max(MIN_BATCH, int(math.floor(budget.bytes_available / one)))
    while batch > MIN_BATCH and estimate_cost(rounded, base_features, pools, batch, budget,
                                              max_features) > budget.bytes_available:
        batch -= 1
    if max_dataset_fraction is not None:
        dataset_voxels = sum(patch_voxels(resampled_shape(s, sp, target_spacing))
                             for s, sp in zip(fingerprint.shapes, fingerprint.spacings))
        cap = int(math.floor(max_dataset_fraction * dataset_voxels / patch_voxels(rounded)))
        batch = max(MIN_BATCH, min(batch, cap))
    return PlanConfig(target_spacing, rounded, batch, pools, base_features, max_features, dimensionality)


def plan_summary(plan: PlanConfig) -> Tuple[str, ...]:
    """
    Human readable lines describing a plan (echoed by the command line).
    """
    lines = ["target spacing : {0}".format(" x ".join("{0:.6g}".format(v) for v in plan.target_spacing)),
             "patch size     : {0}".format(" x ".join(str(v) for v in plan.patch_size)),
             "pools per axis : {0}".format(" ".join(str(v) for v in plan.pools_per_axis)),
             "batch size     : {0:d}".format(plan.batch_size),
             "features       : {0}".format(" ".join(str(plan.features_at(s)) for s in range(plan.num_stages)))]
    return tuple(lines)
