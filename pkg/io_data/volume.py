from typing import Dict, Optional, Tuple, Sequence, Any
import numpy as np
from errors import DomainError, ShapeError
from oct_types import Spacing, Shape3, VENDOR_NAMES, NUM_CLASSES


def _as_triple(values: Sequence[float], name: str) -> Tuple[float, float, float]:
    triple = tuple(float(v) for v in values)
    if len(triple) != 3:
        raise DomainError("{0:s} must hold 3 values, got {1:d}.".format(name, len(triple)))
    return triple


class Grid:
    """
    Base class for the 3D grids handled by the pipeline.

    Axis order is (x=width, y=height/A-scan depth, z=B-scan index). The array returned by
    the property "array" is indexed [x, y, z].
    """

    def __init__(self,
                 array: np.ndarray,
                 spacing: Sequence[float] = (1.0, 1.0, 1.0),
                 origin: Sequence[float] = (0.0, 0.0, 0.0),
                 meta: Optional[Dict[str, str]] = None):
        if array.ndim != 3:
            raise ShapeError("A grid must be 3D, got {0:d} dimension(s).".format(array.ndim))
        if min(array.shape) < 1:
            raise ShapeError("All grid dimensions must be >= 1, got {0}.".format(array.shape))
        self.__array: np.ndarray = array
        self.__spacing: Spacing = _as_triple(spacing, "spacing")
        if min(self.__spacing) <= 0:
            raise DomainError("All spacing values must be > 0, got {0}.".format(self.__spacing))
        self.__origin: Spacing = _as_triple(origin, "origin")
        self.__meta: Dict[str, str] = {str(k): str(v) for k, v in (meta or {}).items()}
        vendor = self.__meta.get("vendor")
        if vendor is not None and vendor not in VENDOR_NAMES:
            raise DomainError('Unknown vendor "{0:s}" (expected one of {1}).'.format(vendor, ", ".join(VENDOR_NAMES)))

    @property
    def array(self) -> np.ndarray:
        return self.__array

    @property
    def shape(self) -> Shape3:
        return tuple(int(s) for s in self.__array.shape)

    @property
    def spacing(self) -> Spacing:
        """
        The physical size of a voxel along each axis, in millimeters.
        """
        return self.__spacing

    @property
    def origin(self) -> Spacing:
        return self.__origin

    @property
    def meta(self) -> Dict[str, str]:
        return dict(self.__meta)

    @property
    def vendor(self) -> Optional[str]:
        return self.__meta.get("vendor")

    def voxel_volume(self) -> float:
        """
        :return: the volume of one voxel in mm³.
        """
        return float(np.prod(self.__spacing))

    def geometry(self) -> Dict[str, Any]:
        return {'spacing': self.__spacing, 'origin': self.__origin, 'meta': dict(self.__meta)}

    def __eq__(self, other: object) -> bool:
        if type(other) is not type(self):
            return False
        return (self.__spacing == other.spacing and self.__origin == other.origin and self.__meta == other.meta and
                self.__array.dtype == other.array.dtype and np.array_equal(self.__array, other.array))

    def __repr__(self) -> str:
        return "{0:s}(shape={1}, spacing={2}, dtype={3})".format(type(self).__name__, self.shape, self.__spacing,
                                                                 self.__array.dtype)


class Volume(Grid):
    """
    A 3D scalar intensity grid (arbitrary vendor units).
    """

    def with_array(self, array: np.ndarray, spacing: Optional[Sequence[float]] = None) -> "Volume":
        return Volume(array, self.spacing if spacing is None else spacing, self.origin, self.meta)


class LabelMask(Grid):
    """
    A 3D grid of class labels: 0 background, 1 IRF, 2 SRF, 3 PED. Labels are stored as uint8.
    """

    def __init__(self,
                 array: np.ndarray,
                 spacing: Sequence[float] = (1.0, 1.0, 1.0),
                 origin: Sequence[float] = (0.0, 0.0, 0.0),
                 meta: Optional[Dict[str, str]] = None):
        if array.size and (array.min() < 0 or array.max() >= NUM_CLASSES):
            raise DomainError("Label values must lie in [0, {0:d}], got [{1}, {2}].".format(NUM_CLASSES - 1,
                                                                                         array.min(), array.max()))
        if array.dtype != np.uint8:
            array = array.astype(np.uint8)
        super().__init__(array, spacing, origin, meta)

    def labels(self) -> Tuple[int, ...]:
        return tuple(int(v) for v in np.unique(self.array))

    def count(self, label: int) -> int:
        return int(np.count_nonzero(self.array == label))

    def with_array(self, array: np.ndarray, spacing: Optional[Sequence[float]] = None) -> "LabelMask":
        return LabelMask(array, self.spacing if spacing is None else spacing, self.origin, self.meta)

    def check_pairs_with(self, volume: Grid) -> None:
        """
        Check that the mask can be paired with a given volume.
        :param volume: the volume.
        :raise ShapeError: if the grid dimensions differ.
        """
        if self.shape != volume.shape:
            raise ShapeError("Mask dims {0} differ from volume dims {1}.".format(self.shape, volume.shape))
