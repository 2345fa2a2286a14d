from typing import Dict, Any, Sequence, Tuple
from errors import DomainError
from loggable import Loggable
from oct_types import Spacing, Shape3

MAX_POOLS = 5


class MemoryBudget(Loggable):
    """
    The memory available to one training step and the empirical cost of one voxel of one feature map.
    """

    def __init__(self, bytes_available: int = 8 * 1024 ** 3, bytes_per_voxel_feature: float = 16.0):
        if bytes_available <= 0 or bytes_per_voxel_feature <= 0:
            raise DomainError("Memory budget values must be positive, got ({0}, {1}).".format(bytes_available,
                                                                                           bytes_per_voxel_feature))
        self.__bytes_available = int(bytes_available)
        self.__bytes_per_voxel_feature = float(bytes_per_voxel_feature)

    @property
    def bytes_available(self) -> int:
        return self.__bytes_available

    @bytes_available.setter
    def bytes_available(self, value: int) -> None:
        if value <= 0:
            raise DomainError("bytes_available must be positive, got {0}.".format(value))
        self.__bytes_available = int(value)

    @property
    def bytes_per_voxel_feature(self) -> float:
        return self.__bytes_per_voxel_feature

    @bytes_per_voxel_feature.setter
    def bytes_per_voxel_feature(self, value: float) -> None:
        if value <= 0:
            raise DomainError("bytes_per_voxel_feature must be positive, got {0}.".format(value))
        self.__bytes_per_voxel_feature = float(value)

    def to_dict(self) -> Dict[str, Any]:
        return {'log-type': 'memory_budget',
                'bytes_available': self.__bytes_available,
                'bytes_per_voxel_feature': self.__bytes_per_voxel_feature}

    @staticmethod
    def from_dict(d: Dict[str, Any]) -> "MemoryBudget":
        return MemoryBudget(d.get('bytes_available', 8 * 1024 ** 3), d.get('bytes_per_voxel_feature', 16.0))


class PlanConfig(Loggable):
    """
    The resolved pipeline hyperparameters. A plan is immutable; use "replace()" to derive a new plan.
    """

    def __init__(self,
                 target_spacing: Sequence[float],
                 patch_size: Sequence[int],
                 batch_size: int,
                 pools_per_axis: Sequence[int],
                 base_features: int = 32,
                 max_features: int = 320,
                 dimensionality: int = 3):
        self.__target_spacing: Spacing = tuple(float(v) for v in target_spacing)
        self.__patch_size: Shape3 = tuple(int(v) for v in patch_size)
        self.__batch_size = int(batch_size)
        self.__pools_per_axis: Shape3 = tuple(int(v) for v in pools_per_axis)
        self.__base_features = int(base_features)
        self.__max_features = int(max_features)
        self.__dimensionality = int(dimensionality)
        self.__check()

    def __check(self) -> None:
        if len(self.__target_spacing) != 3 or min(self.__target_spacing) <= 0:
            raise DomainError("Invalid target spacing {0}.".format(self.__target_spacing))
        if len(self.__patch_size) != 3 or min(self.__patch_size) < 1:
            raise DomainError("Invalid patch size {0}.".format(self.__patch_size))
        if len(self.__pools_per_axis) != 3 or min(self.__pools_per_axis) < 0 or max(self.__pools_per_axis) > MAX_POOLS:
            raise DomainError("Invalid pooling schedule {0}.".format(self.__pools_per_axis))
        for axis, (n, p) in enumerate(zip(self.__patch_size, self.__pools_per_axis)):
            if n % (2 ** p):
                raise DomainError("Patch axis {0:d} ({1:d}) is not divisible by 2^{2:d}.".format(axis, n, p))
        if self.__batch_size < 2:
            raise DomainError("Batch size must be >= 2, got {0:d}.".format(self.__batch_size))
        if self.__base_features < 1 or self.__max_features < self.__base_features:
            raise DomainError("Invalid feature widths ({0:d}, {1:d}).".format(self.__base_features,
                                                                             self.__max_features))
        if self.__dimensionality not in (2, 3):
            raise DomainError("Dimensionality must be 2 or 3, got {0:d}.".format(self.__dimensionality))
        if self.__dimensionality == 2 and (self.__patch_size[2] != 1 or self.__pools_per_axis[2] != 0):
            raise DomainError("A 2D plan works on single B-scans: patch z must be 1 and pools z 0.")

    @property
    def target_spacing(self) -> Spacing:
        return self.__target_spacing

    @property
    def patch_size(self) -> Shape3:
        return self.__patch_size

    @property
    def batch_size(self) -> int:
        return self.__batch_size

    @property
    def pools_per_axis(self) -> Shape3:
        return self.__pools_per_axis

    @property
    def base_features(self) -> int:
        return self.__base_features

    @property
    def max_features(self) -> int:
        return self.__max_features

    @property
    def dimensionality(self) -> int:
        return self.__dimensionality

    @property
    def num_stages(self) -> int:
        return max(self.__pools_per_axis) + 1

    def features_at(self, stage: int) -> int:
        """
        :return: the feature width of an encoder stage (doubling per stage, capped at max_features).
        """
        return min(self.__base_features * 2 ** stage, self.__max_features)

    def divisor(self) -> Shape3:
        return tuple(2 ** p for p in self.__pools_per_axis)

    def replace(self, **changes) -> "PlanConfig":
        """
        Derive a new plan. For example: plan.replace(base_features=8, batch_size=2).
        Changing the patch size without changing the pools keeps the pools when they remain valid.
        """
        values = {
            'target_spacing': self.__target_spacing,
            'patch_size': self.__patch_size,
            'batch_size': self.__batch_size,
            'pools_per_axis': self.__pools_per_axis,
            'base_features': self.__base_features,
            'max_features': self.__max_features,
            'dimensionality': self.__dimensionality
        }
        unknown = set(changes) - set(values)
        if unknown:
            raise DomainError("Unknown plan field(s): {0}.".format(", ".join(sorted(unknown))))
        values.update(changes)
        return PlanConfig(**values)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'log-type': 'plan',
            'target_spacing': list(self.__target_spacing),
            'patch_size': list(self.__patch_size),
            'batch_size': self.__batch_size,
            'pools_per_axis': list(self.__pools_per_axis),
            'base_features': self.__base_features,
            'max_features': self.__max_features,
            'dimensionality': self.__dimensionality
        }

    @staticmethod
    def from_dict(d: Dict[str, Any]) -> "PlanConfig":
        return PlanConfig(d['target_spacing'], d['patch_size'], d['batch_size'], d['pools_per_axis'],
                          d.get('base_features', 32), d.get('max_features', 320), d.get('dimensionality', 3))

    def __eq__(self, other: object) -> bool:
        return isinstance(other, PlanConfig) and self.to_dict() == other.to_dict()

    def __repr__(self) -> str:
        return "PlanConfig({0})".format(", ".join("{0}={1}".format(k, v) for k, v in self.to_dict().items()
                                                   if k != 'log-type'))


def patch_voxels(patch: Sequence[int]) -> int:
    n = 1
    for v in patch:
        n *= int(v)
    return n


def stage_shape(patch: Sequence[int], pools: Sequence[int], stage: int) -> Tuple[int, ...]:
    """
    :return: the spatial dims of the feature maps of a stage.
    """
    return tuple(int(n) // 2 ** min(stage, int(p)) for n, p in zip(patch, pools))
