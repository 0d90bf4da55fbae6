"""
NDT1 binary tensor container.

Record layout (all integers little-endian):

    b"NDT1" | u8 dtype code | u8 rank | rank x u32 extents | raw data

A bundle is a single UTF-8 JSON header line followed by one record per
named tensor, in the order listed in the header's ``names`` field. Bundles
carry datasets and checkpoints.
"""

import json
import struct
from pathlib import Path
from typing import IO, Any, Dict, Mapping, Tuple

import numpy as np

from app.core.exceptions import ContainerFormatError

MAGIC = b"NDT1"

DTYPE_CODES: Dict[int, np.dtype] = {
    1: np.dtype("<f4"),
    2: np.dtype("<f8"),
    3: np.dtype("u1"),
    4: np.dtype("<i4"),
    5: np.dtype("<i8"),
}
_CODE_FOR = {(dt.kind, dt.itemsize): code for code, dt in DTYPE_CODES.items()}


def _code(dtype: np.dtype) -> int:
    dtype = np.dtype(dtype)
    key = (dtype.kind, dtype.itemsize)
    if key not in _CODE_FOR:
        raise ContainerFormatError("Unsupported dtype for NDT1", details=str(dtype))
    return _CODE_FOR[key]


def write_array(stream: IO[bytes], array: np.ndarray) -> None:
    array = np.asarray(array)
    code = _code(array.dtype)
    if array.ndim > 255:
        raise ContainerFormatError("Rank too large for NDT1", details=array.ndim)
    stream.write(MAGIC)
    stream.write(struct.pack("<BB", code, array.ndim))
    stream.write(struct.pack(f"<{array.ndim}I", *array.shape))
    stream.write(np.ascontiguousarray(array, dtype=DTYPE_CODES[code]).tobytes(order="C"))


def read_array(stream: IO[bytes]) -> np.ndarray:
    magic = stream.read(4)
    if magic != MAGIC:
        raise ContainerFormatError("Bad NDT1 magic", details=magic)
    header = stream.read(2)
    if len(header) != 2:
        raise ContainerFormatError("Truncated NDT1 header")
    code, rank = struct.unpack("<BB", header)
    if code not in DTYPE_CODES:
        raise ContainerFormatError("Unknown NDT1 dtype code", details=code)
    extents_raw = stream.read(4 * rank)
    if len(extents_raw) != 4 * rank:
        raise ContainerFormatError("Truncated NDT1 extents")
    shape = struct.unpack(f"<{rank}I", extents_raw)
    dtype = DTYPE_CODES[code]
    count = int(np.prod(shape, dtype=np.int64)) if rank else 1
    payload = stream.read(count * dtype.itemsize)
    if len(payload) != count * dtype.itemsize:
        raise ContainerFormatError("Truncated NDT1 payload", details={"shape": shape})
    return np.frombuffer(payload, dtype=dtype).reshape(shape).copy()


def save_array(path: Path, array: np.ndarray) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("wb") as fh:
        write_array(fh, array)


def load_array(path: Path) -> np.ndarray:
    with Path(path).open("rb") as fh:
        return read_array(fh)


def save_bundle(path: Path, header: Mapping[str, Any], tensors: Mapping[str, np.ndarray]) -> None:
    """Write a JSON header line and the named records in insertion order."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    meta = dict(header)
    meta["names"] = list(tensors.keys())
    line = json.dumps(meta, sort_keys=True, separators=(",", ":")).encode("utf-8")
    if b"\n" in line:
        raise ContainerFormatError("Bundle header must be a single line")
    tmp = path.with_suffix(path.suffix + ".tmp")
    with tmp.open("wb") as fh:
        fh.write(line + b"\n")
        for array in tensors.values():
            write_array(fh, array)
    tmp.replace(path)


def load_bundle(path: Path) -> Tuple[Dict[str, Any], Dict[str, np.ndarray]]:
    """Inverse of `save_bundle`."""
    try:
        fh = Path(path).open("rb")
    except OSError as e:
        raise ContainerFormatError(f"Cannot open bundle {path}", details=str(e)) from e
    with fh:
        line = fh.readline()
        try:
            header = json.loads(line.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as e:
            raise ContainerFormatError("Bundle header is not valid JSON", details=str(e)) from e
        names = header.get("names")
        if not isinstance(names, list):
            raise ContainerFormatError("Bundle header lacks a names list")
        tensors = {name: read_array(fh) for name in names}
        if fh.read(1):
            raise ContainerFormatError("Trailing bytes after last record")
    return header, tensors
