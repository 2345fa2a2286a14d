"""
MetaImage reader and writer.

A MetaImage is an ASCII header made of "Key = Value" lines followed by a raw payload, stored either
in a separate file (".mhd" header + ".raw" payload) or appended to the header ("ElementDataFile = LOCAL",
".mha"). The payload is little-endian with x varying fastest, which matches a numpy array indexed
[x, y, z] written in Fortran order.

Header mapping:

    DimSize          "X Y Z"  (x=width, y=A-scan depth, z=B-scan index)
    ElementSpacing   "sx sy sz" in millimeters
    Offset           "ox oy oz" in millimeters (optional on read, "Origin" is accepted too)
    ElementType      MET_UCHAR, MET_SHORT, MET_USHORT, MET_FLOAT or MET_DOUBLE
    ElementDataFile  payload file name, relative to the header, or LOCAL
    OctKind          "volume" or "mask" (written by this module, optional on read)

Any other key is kept in the "meta" dictionary of the grid.
"""

from typing import Dict, Union, Optional, List, Tuple
import os
import numpy as np
from errors import MetaImageFormatError, TruncationError, DomainError
from io_data.volume import Volume, LabelMask, Grid

ELEMENT_TYPES: Dict[str, np.dtype] = {
    "MET_UCHAR": np.dtype("<u1"),
    "MET_SHORT": np.dtype("<i2"),
    "MET_USHORT": np.dtype("<u2"),
    "MET_FLOAT": np.dtype("<f4"),
    "MET_DOUBLE": np.dtype("<f8"),
}
_DTYPE_TO_ELEMENT_TYPE: Dict[str, str] = {
    "uint8": "MET_UCHAR",
    "int16": "MET_SHORT",
    "uint16": "MET_USHORT",
    "float32": "MET_FLOAT",
    "float64": "MET_DOUBLE",
}
STANDARD_KEYS = ("ObjectType", "NDims", "BinaryData", "BinaryDataByteOrderMSB", "ElementByteOrderMSB",
                 "CompressedData", "TransformMatrix", "CenterOfRotation", "AnatomicalOrientation", "Offset",
                 "Origin", "Position", "ElementSpacing", "DimSize", "ElementType", "ElementDataFile", "OctKind")
KIND_VOLUME = "volume"
KIND_MASK = "mask"


def element_type_for(dtype: np.dtype) -> str:
    """
    Return the MetaImage element type used to store a numpy data type.
    :param dtype: the numpy data type.
    :return: the MetaImage element type.
    :raise DomainError: if the data type cannot be stored.
    """
    name = np.dtype(dtype).name
    if name not in _DTYPE_TO_ELEMENT_TYPE:
        raise DomainError('Voxel type "{0:s}" cannot be stored in a MetaImage (supported: {1}).'
                          .format(name, ", ".join(sorted(_DTYPE_TO_ELEMENT_TYPE))))
    return _DTYPE_TO_ELEMENT_TYPE[name]


def _parse_header(lines: List[str], path: str) -> Dict[str, str]:
    header: Dict[str, str] = {}
    for line in lines:
        line = line.strip()
        if len(line) == 0:
            continue
        if "=" not in line:
            raise MetaImageFormatError(line.split()[0], path, "expected \"Key = Value\"")
        key, value = line.split("=", 1)
        header[key.strip()] = value.strip()
    return header


def _numbers(header: Dict[str, str], key: str, path: str, kind: type, count: int = 3) -> Tuple:
    if key not in header:
        raise MetaImageFormatError(key, path)
    try:
        values = tuple(kind(v) for v in header[key].split())
    except ValueError:
        raise MetaImageFormatError(key, path, 'cannot parse "{0:s}"'.format(header[key]))
    if len(values) != count:
        raise MetaImageFormatError(key, path, "{0:d} values expected, got {1:d}".format(count, len(values)))
    return values


def _split_header(raw: bytes, path: str) -> Tuple[List[str], int]:
    """
    Split a file content into header lines and the offset of the local payload (if any).
    The header ends with the line that holds the key "ElementDataFile".
    """
    lines: List[str] = []
    position = 0
    while position < len(raw):
        end = raw.find(b"\n", position)
        if end < 0:
            end = len(raw)
        try:
            line = raw[position:end].decode("ascii").rstrip("\r")
        except UnicodeDecodeError:
            raise MetaImageFormatError("ElementDataFile", path, "binary data found before the end of the header")
        lines.append(line)
        position = end + 1
        if line.strip().startswith("ElementDataFile"):
            return lines, position
    raise MetaImageFormatError("ElementDataFile", path)


def read_metaimage(path: str, as_mask: Optional[bool] = None) -> Union[Volume, LabelMask]:
    """
    Read a MetaImage.

    :param path: the path to the header (".mhd" or ".mha").
    :param as_mask: True to load a LabelMask, False to load a Volume. If None, the header key "OctKind"
    decides and a Volume is returned when the key is absent.
    :return: the grid.
    :raise MetaImageFormatError: if a required header key is missing or garbled.
    :raise TruncationError: if the payload size does not match the header.
    """
    with open(path, "rb") as fd:
        raw = fd.read()
    lines, payload_offset = _split_header(raw, path)
    header = _parse_header(lines, path)

    ndims = _numbers(header, "NDims", path, int, 1)[0]
    if ndims != 3:
        raise MetaImageFormatError("NDims", path, "only 3D images are supported, got {0:d}".format(ndims))
    dims = _numbers(header, "DimSize", path, int)
    if min(dims) < 1:
        raise MetaImageFormatError("DimSize", path, "dimensions must be >= 1")
    spacing = _numbers(header, "ElementSpacing", path, float)
    origin_key = "Offset" if "Offset" in header else ("Origin" if "Origin" in header else None)
    origin = _numbers(header, origin_key, path, float) if origin_key is not None else (0.0, 0.0, 0.0)
    element_type = header.get("ElementType")
    if element_type not in ELEMENT_TYPES:
        raise MetaImageFormatError("ElementType", path, "unsupported value {0!r}".format(element_type))
    if header.get("CompressedData", "False").lower() == "true":
        raise MetaImageFormatError("CompressedData", path, "compressed payloads are not supported")
    dtype = ELEMENT_TYPES[element_type]
    big_endian = header.get("BinaryDataByteOrderMSB", header.get("ElementByteOrderMSB", "False")).lower() == "true"
    if big_endian:
        dtype = dtype.newbyteorder(">")

    data_file = header["ElementDataFile"]
    if data_file == "LOCAL":
        payload_path = path
        payload = raw[payload_offset:]
    else:
        payload_path = os.path.join(os.path.dirname(path), data_file)
        if not os.path.exists(payload_path):
            raise MetaImageFormatError("ElementDataFile", path, 'payload "{0:s}" not found'.format(payload_path))
        with open(payload_path, "rb") as fd:
            payload = fd.read()

    expected = int(np.prod(dims)) * dtype.itemsize
    if len(payload) != expected:
        raise TruncationError(payload_path, expected, len(payload))
    array = np.frombuffer(payload, dtype=dtype).reshape(dims, order="F").astype(dtype.newbyteorder("="))

    meta = {k: v for k, v in header.items() if k not in STANDARD_KEYS}
    kind = header.get("OctKind", KIND_VOLUME)
    if as_mask is None:
        as_mask = kind == KIND_MASK
    if as_mask:
        return LabelMask(array, spacing, origin, meta)
    return Volume(array, spacing, origin, meta)


def write_metaimage(grid: Grid, path: str) -> None:
    """
    Write a volume or a mask as a MetaImage. Masks are stored as 8-bit unsigned integers.

    If the path ends with ".mha", the payload is appended to the header (ElementDataFile = LOCAL).
    Otherwise the payload is written next to the header, with the extension ".raw".

    :param grid: the volume or the mask.
    :param path: the path to the header.
    :raise OSError: if the path cannot be written.
    """
    is_mask = isinstance(grid, LabelMask)
    array = grid.array.astype(np.uint8) if is_mask else grid.array
    element_type = element_type_for(array.dtype)
    payload = np.asarray(array, dtype=ELEMENT_TYPES[element_type]).tobytes(order="F")
    local = path.lower().endswith(".mha")
    data_file = "LOCAL" if local else os.path.splitext(os.path.basename(path))[0] + ".raw"

    lines = ["ObjectType = Image",
             "NDims = 3",
             "BinaryData = True",
             "BinaryDataByteOrderMSB = False",
             "CompressedData = False",
             "Offset = " + " ".join(repr(v) for v in grid.origin),
             "ElementSpacing = " + " ".join(repr(v) for v in grid.spacing),
             "DimSize = " + " ".join(str(v) for v in grid.shape),
             "OctKind = " + (KIND_MASK if is_mask else KIND_VOLUME)]
    for key, value in sorted(grid.meta.items()):
        if key in STANDARD_KEYS or "=" in key or any(c.isspace() for c in key) or "\n" in value:
            raise DomainError('Meta entry "{0:s}" cannot be stored in a MetaImage header.'.format(key))
        lines.append("{0:s} = {1:s}".format(key, value))
    lines.append("ElementType = " + element_type)
    lines.append("ElementDataFile = " + data_file)
    header = ("\n".join(lines) + "\n").encode("ascii")

    with open(path, "wb") as fd:
        fd.write(header)
        if local:
            fd.write(payload)
    if not local:
        with open(os.path.join(os.path.dirname(path), data_file), "wb") as fd:
            fd.write(payload)
