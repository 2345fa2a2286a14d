"""
Synthetic retina-like phantoms for desk-scale runs.

A phantom is a stack of horizontal bands (vitreous, retinal layers, RPE, choroid) that follow a
smooth curvature across the B-scans, with speckle-like noise and ellipsoidal "fluid" blobs:

    IRF (1)  dark blobs inside the retinal layers
    SRF (2)  very dark blobs between the retina and the RPE
    PED (3)  medium blobs that lift the RPE, below the RPE line
"""

from typing import Dict, Tuple, Optional, List
import numpy as np
from errors import DomainError
from oct_types import Shape3, Spacing, IRF, SRF, PED, Vendor
from io_data.volume import Volume, LabelMask


class VendorProfile:

    def __init__(self, name: str, vendor: str, dims: Shape3, spacing: Spacing,
                 blob_radius: Tuple[float, float], noise: float, intensity_scale: float):
        """
        :param name: the name of the profile.
        :param vendor: the vendor written in the metadata of the generated volumes.
        :param dims: grid dimensions (width, height, B-scans).
        :param spacing: voxel size in millimeters.
        :param blob_radius: range of the fluid blob radius, as a fraction of the retina thickness.
        :param noise: standard deviation of the multiplicative speckle noise.
        :param intensity_scale: vendor intensity unit (the maximal band value).
        """
        self.__name = name
        self.__vendor = vendor
        self.__dims = dims
        self.__spacing = spacing
        self.__blob_radius = blob_radius
        self.__noise = noise
        self.__intensity_scale = intensity_scale

    @property
    def name(self) -> str:
        return self.__name

    @property
    def vendor(self) -> str:
        return self.__vendor

    @property
    def dims(self) -> Shape3:
        return self.__dims

    @property
    def spacing(self) -> Spacing:
        return self.__spacing

    @property
    def blob_radius(self) -> Tuple[float, float]:
        return self.__blob_radius

    @property
    def noise(self) -> float:
        return self.__noise

    @property
    def intensity_scale(self) -> float:
        return self.__intensity_scale


VENDOR_PROFILES: Dict[str, VendorProfile] = {
    "Cirrus": VendorProfile("Cirrus", Vendor.CIRRUS.value, (512, 1024, 128), (0.01171875, 0.001955034, 0.047244),
                            (0.15, 0.35), 0.10, 255.0),
    "Spectralis": VendorProfile("Spectralis", Vendor.SPECTRALIS.value, (512, 496, 49), (0.011301, 0.003872, 0.122588),
                                (0.15, 0.35), 0.05, 65535.0),
    "Topcon": VendorProfile("Topcon", Vendor.TOPCON.value, (512, 885, 128), (0.01171875, 0.0026, 0.047244),
                            (0.15, 0.35), 0.12, 255.0),
    "Topcon-T1000": VendorProfile("Topcon-T1000", Vendor.TOPCON.value, (512, 650, 128), (0.01171875, 0.0035, 0.047244),
                                  (0.15, 0.35), 0.12, 255.0),
    "Tiny": VendorProfile("Tiny", Vendor.PHANTOM.value, (32, 32, 16), (0.05, 0.02, 0.1),
                          (0.3, 0.45), 0.04, 1.0),
}

# (relative top of the band within [0, 1] of the A-scan, band intensity relative to the RPE)
_BANDS: Tuple[Tuple[float, float], ...] = (
    (0.00, 0.05),   # vitreous
    (0.25, 0.55),   # nerve fiber layer
    (0.31, 0.35),   # ganglion / plexiform layers
    (0.38, 0.60),
    (0.45, 0.30),   # nuclear layers
    (0.55, 0.50),   # photoreceptors
    (0.62, 1.00),   # RPE
    (0.66, 0.40),   # choroid
)
_RETINA_TOP = 0.25
_RPE_TOP = 0.62
_RPE_BOTTOM = 0.66
_FLUID_INTENSITY = {IRF: 0.12, SRF: 0.02, PED: 0.22}


def _ellipsoid(shape: Shape3, center: np.ndarray, radii: np.ndarray) -> Tuple[Tuple[slice, ...], np.ndarray]:
    """
    :return: the bounding box of an ellipsoid and its boolean footprint inside the box.
    """
    lows = [max(0, int(np.floor(c - r))) for c, r in zip(center, radii)]
    highs = [min(n, int(np.ceil(c + r)) + 1) for n, c, r in zip(shape, center, radii)]
    grids = np.meshgrid(*[np.arange(lo, hi, dtype=np.float64) for lo, hi in zip(lows, highs)], indexing="ij")
    distance = sum(((g - c) / r) ** 2 for g, c, r in zip(grids, center, radii))
    return tuple(slice(lo, hi) for lo, hi in zip(lows, highs)), distance <= 1.0


def generate_phantom(seed: int,
                     vendor_profile: str,
                     blobs_per_class: Tuple[int, int] = (0, 3),
                     vendor: Optional[str] = None):
    """
    Generate a phantom (volume, mask) pair.

    :param seed: the seed; the phantom is a pure function of (seed, profile, options).
    :param vendor_profile: one of Cirrus, Spectralis, Topcon, Topcon-T1000, Tiny.
    :param blobs_per_class: inclusive range of the number of fluid blobs drawn per class.
    :param vendor: the vendor written in the metadata (default: the vendor of the profile).
    :return: the volume (float32, vendor intensity units) and its mask.
    :raise DomainError: if the profile is unknown.
    """
    if vendor_profile not in VENDOR_PROFILES:
        raise DomainError('Unknown phantom profile "{0:s}" (expected one of {1}).'
                          .format(str(vendor_profile), ", ".join(VENDOR_PROFILES)))
    low, high = blobs_per_class
    if low < 0 or high < low:
        raise DomainError("Invalid blob count range {0}.".format(blobs_per_class))
    profile = VENDOR_PROFILES[vendor_profile]
    rng = np.random.default_rng(seed)
    nx, ny, nz = profile.dims

    # Smooth curvature of the retina across the B-scan plane: an offset (in A-scan samples) per (x, z).
    u = np.linspace(-1.0, 1.0, nx)[:, None]
    v = np.linspace(-1.0, 1.0, nz)[None, :]
    tilt = rng.uniform(-0.04, 0.04, size=2)
    bowl = rng.uniform(0.0, 0.06)
    offset = (tilt[0] * u + tilt[1] * v + bowl * (u ** 2 + v ** 2)) * ny

    # Band lookup along the A-scan, indexed by the band-relative depth.
    relative = (np.arange(ny, dtype=np.float32) / np.float32(ny))[None, :, None] - (offset / ny).astype(np.float32)[:, None, :]
    intensity = np.full((nx, ny, nz), _BANDS[0][1], dtype=np.float32)
    for top, value in _BANDS[1:]:
        intensity[relative >= top] = value

    labels = np.zeros((nx, ny, nz), dtype=np.uint8)
    thickness = (_RPE_TOP - _RETINA_TOP) * ny
    regions = {
        IRF: (_RETINA_TOP + 0.05, _RPE_TOP - 0.12),
        SRF: (_RPE_TOP - 0.06, _RPE_TOP - 0.02),
        PED: (_RPE_BOTTOM + 0.02, _RPE_BOTTOM + 0.08),
    }
    margin_x = max(1.0, nx * 0.1)
    margin_z = max(1.0, nz * 0.1)
    for label in (IRF, SRF, PED):
        count = int(rng.integers(low, high + 1))
        for _ in range(count):
            cx = rng.uniform(margin_x, nx - 1 - margin_x)
            cz = rng.uniform(margin_z, nz - 1 - margin_z)
            top, bottom = regions[label]
            local_offset = offset[int(round(cx)), int(round(cz))]
            cy = rng.uniform(top, bottom) * ny + local_offset
            r = rng.uniform(*profile.blob_radius) * thickness
            radii = np.array([max(3.0, r * rng.uniform(1.0, 2.0)),
                              max(3.0, r * 0.6),
                              max(3.0, r * rng.uniform(0.5, 1.0) * nz / nx * 2.0)])
            box, footprint = _ellipsoid((nx, ny, nz), np.array([cx, cy, cz]), radii)
            intensity[box][footprint] = _FLUID_INTENSITY[label]
            labels[box][footprint] = label

    speckle = rng.standard_normal(size=(nx, ny, nz), dtype=np.float32) * np.float32(profile.noise) + np.float32(1.0)
    voxels = np.clip(intensity * speckle, 0.0, None) * np.float32(profile.intensity_scale)
    meta = {'vendor': vendor if vendor is not None else profile.vendor,
            'patient': "phantom-{0:d}".format(seed),
            'profile': profile.name}
    return (Volume(voxels.astype(np.float32), profile.spacing, (0.0, 0.0, 0.0), meta),
            LabelMask(labels, profile.spacing, (0.0, 0.0, 0.0), meta))


def phantom_series(seed: int, profile: str, count: int, **options) -> List[tuple]:
    """
    Generate "count" phantoms with the seeds seed, seed+1, ...
    """
    return [generate_phantom(seed + i, profile, **options) for i in range(count)]
