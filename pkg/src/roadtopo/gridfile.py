"""GRDF: a 12-byte-header raster file that round-trips f32 grids bit-exactly.

Layout: magic ``GRDF``, width u32 LE, height u32 LE, then width×height f32 LE
row-major (row 0 top). Masks and label grids ride the same container as 0/1
and small-integer payloads, so one codec serves every artifact the CLI moves.
"""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import FileFormatError
from .grids import BinaryMask, LabelGrid, ScalarGrid

MAGIC = b"GRDF"
_HEADER = struct.Struct("<4sII")


def grid_to_bytes(grid: ScalarGrid) -> bytes:
    payload = np.ascontiguousarray(grid.data, "<f4").tobytes()
    return _HEADER.pack(MAGIC, grid.width, grid.height) + payload


def grid_from_bytes(blob: bytes) -> ScalarGrid:
    if len(blob) < _HEADER.size:
        raise FileFormatError("truncated header")
    magic, width, height = _HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise FileFormatError(f"bad magic {magic!r}")
    if width == 0 or height == 0:
        raise FileFormatError("zero extent")
    body = blob[_HEADER.size :]
    want = 4 * width * height
    if len(body) < want:
        raise FileFormatError(f"payload short: {len(body)} < {want} bytes")
    if len(body) > want:
        raise FileFormatError(f"{len(body) - want} trailing bytes")
    data = np.frombuffer(body, "<f4").reshape(height, width)
    if not np.isfinite(data).all():
        raise FileFormatError("non-finite values in payload")
    return ScalarGrid(data)


def write_grid(path: str | Path, grid: ScalarGrid) -> None:
    Path(path).write_bytes(grid_to_bytes(grid))


def read_grid(path: str | Path) -> ScalarGrid:
    return grid_from_bytes(Path(path).read_bytes())


def write_mask(path: str | Path, mask: BinaryMask) -> None:
    write_grid(path, ScalarGrid(mask.data.astype(np.float32)))


def read_mask(path: str | Path) -> BinaryMask:
    grid = read_grid(path)
    ok = (grid.data == 0.0) | (grid.data == 1.0)
    if not ok.all():
        raise FileFormatError("mask payload must be exactly 0/1")
    return BinaryMask(grid.data == 1.0)


def write_labels(path: str | Path, labels: LabelGrid) -> None:
    as_f32 = labels.data.astype(np.float32)
    if (as_f32.astype(np.int64) != labels.data).any():  # beyond exact-f32 ints
        raise ValueError("labels too large to store exactly as f32")
    write_grid(path, ScalarGrid(as_f32))


def read_labels(path: str | Path, connectivity: int = 4) -> LabelGrid:
    grid = read_grid(path)
    data = grid.data
    if (data < 0).any() or (np.rint(data) != data).any():
        raise FileFormatError("labels payload must be non-negative integers")
    ints = data.astype(np.int32)
    try:
        return LabelGrid(ints, int(ints.max()), connectivity)
    except ValueError as e:
        raise FileFormatError(f"not a valid label grid: {e}") from None
