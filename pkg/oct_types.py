from typing import NewType, Tuple
from enum import Enum

Spacing = Tuple[float, float, float]
Shape3 = Tuple[int, int, int]
ClassLabel = NewType("ClassLabel", int)
Seed = NewType("Seed", int)
ByteCount = NewType("ByteCount", int)

BACKGROUND = ClassLabel(0)
IRF = ClassLabel(1)
SRF = ClassLabel(2)
PED = ClassLabel(3)
FLUID_CLASSES: Tuple[ClassLabel, ...] = (IRF, SRF, PED)
NUM_CLASSES = 4
CLASS_NAMES = {IRF: "IRF", SRF: "SRF", PED: "PED"}


class Vendor(Enum):
    CIRRUS = "Cirrus"
    SPECTRALIS = "Spectralis"
    TOPCON = "Topcon"
    PHANTOM = "Phantom"


class Split(Enum):
    TRAIN = "train"
    TEST = "test"


class ModelName(Enum):
    UNET = "unet"
    RASPP = "raspp"


VENDOR_NAMES = tuple(v.value for v in Vendor)
