"""Checkpoint archives: JSON metadata plus named tensors, bit-exact.

An archive is a zip file with two members:

``meta.json``
    UTF-8 JSON object. Always carries ``format`` ("attredit-checkpoint"),
    ``version`` (currently 1), and ``kind``; model checkpoints add the
    architecture config, the ordered attribute names, the training step,
    the loss weights, and any numpy RNG states.

``tensors.bin``
    Little-endian binary stream of named tensors:

        magic   4 bytes  b"ATET"
        version u32
        count   u32
        then per tensor:
        name_len u16, name utf-8 bytes,
        dtype    u8   (0=float32, 1=float64, 2=int64, 3=uint8),
        ndim     u8,  dims u64 * ndim,
        data     raw row-major bytes

Round trips are bit-exact: every stored array is reproduced with identical
bytes, dtype, and shape.
"""

from __future__ import annotations

import io
import json
import struct
import zipfile
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

import numpy as np

MAGIC = b"ATET"
FORMAT_NAME = "attredit-checkpoint"
FORMAT_VERSION = 1

_DTYPE_CODES = {
    np.dtype("float32"): 0,
    np.dtype("float64"): 1,
    np.dtype("int64"): 2,
    np.dtype("uint8"): 3,
}
_CODE_DTYPES = {code: dtype for dtype, code in _DTYPE_CODES.items()}


class CheckpointFormatError(ValueError):
    pass


def pack_tensors(tensors: Mapping[str, np.ndarray]) -> bytes:
    out = io.BytesIO()
    out.write(MAGIC)
    out.write(struct.pack("<II", FORMAT_VERSION, len(tensors)))
    for name, array in tensors.items():
        array = np.asarray(array)
        shape = array.shape  # ascontiguousarray would promote 0-d to 1-d
        array = np.ascontiguousarray(array)
        if array.dtype not in _DTYPE_CODES:
            raise CheckpointFormatError(
                f"tensor {name!r} has unsupported dtype {array.dtype}"
            )
        encoded = name.encode("utf-8")
        out.write(struct.pack("<H", len(encoded)))
        out.write(encoded)
        out.write(struct.pack("<BB", _DTYPE_CODES[array.dtype], len(shape)))
        out.write(struct.pack(f"<{len(shape)}Q", *shape))
        out.write(array.tobytes(order="C"))
    return out.getvalue()


def unpack_tensors(blob: bytes) -> dict[str, np.ndarray]:
    view = memoryview(blob)
    if bytes(view[:4]) != MAGIC:
        raise CheckpointFormatError("bad tensor stream magic")
    version, count = struct.unpack_from("<II", view, 4)
    if version != FORMAT_VERSION:
        raise CheckpointFormatError(f"unsupported tensor stream version {version}")
    offset = 12
    tensors: dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_len,) = struct.unpack_from("<H", view, offset)
        offset += 2
        name = bytes(view[offset : offset + name_len]).decode("utf-8")
        offset += name_len
        code, ndim = struct.unpack_from("<BB", view, offset)
        offset += 2
        shape = struct.unpack_from(f"<{ndim}Q", view, offset)
        offset += 8 * ndim
        dtype = _CODE_DTYPES.get(code)
        if dtype is None:
            raise CheckpointFormatError(f"unknown dtype code {code}")
        size = int(np.prod(shape, dtype=np.int64)) * dtype.itemsize
        data = np.frombuffer(view[offset : offset + size], dtype=dtype)
        offset += size
        tensors[name] = data.reshape(shape).copy()
    return tensors


@dataclass
class Checkpoint:
    meta: dict
    tensors: dict[str, np.ndarray]


def save_checkpoint(
    path: str | Path, meta: Mapping, tensors: Mapping[str, np.ndarray]
) -> Path:
    path = Path(path)
    meta = dict(meta)
    meta.setdefault("format", FORMAT_NAME)
    meta.setdefault("version", FORMAT_VERSION)
    path.parent.mkdir(parents=True, exist_ok=True)
    with zipfile.ZipFile(path, "w", compression=zipfile.ZIP_DEFLATED) as zf:
        zf.writestr("meta.json", json.dumps(meta, indent=2, sort_keys=True))
        zf.writestr("tensors.bin", pack_tensors(tensors))
    return path


def load_checkpoint(path: str | Path) -> Checkpoint:
    path = Path(path)
    with zipfile.ZipFile(path, "r") as zf:
        names = set(zf.namelist())
        if "meta.json" not in names or "tensors.bin" not in names:
            raise CheckpointFormatError(
                f"{path} is not a checkpoint archive (members: {sorted(names)})"
            )
        meta = json.loads(zf.read("meta.json").decode("utf-8"))
        tensors = unpack_tensors(zf.read("tensors.bin"))
    if meta.get("format") != FORMAT_NAME:
        raise CheckpointFormatError(
            f"unexpected archive format {meta.get('format')!r}"
        )
    return Checkpoint(meta=meta, tensors=tensors)
