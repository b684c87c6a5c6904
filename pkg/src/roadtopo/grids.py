"""Raster primitives: typed grids, morphology, distance transform, tiling.

Grids are immutable after construction (the backing numpy array is marked
read-only), so they can be shared freely between worker threads.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import scipy.ndimage as ndi

from ._kernels import edt_squared

_STRUCT_4 = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=np.uint8)
_STRUCT_8 = np.ones((3, 3), dtype=np.uint8)


def _freeze(data: np.ndarray, dtype) -> np.ndarray:
    arr = np.array(data, dtype=dtype, order="C", copy=True)
    if arr.ndim != 2:
        raise ValueError(f"grid data must be 2-D, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"grid must be at least 1x1, got shape {arr.shape}")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class ScalarGrid:
    """Single-precision raster, row-major, row 0 at top. Values always finite."""

    data: np.ndarray

    def __post_init__(self):
        arr = _freeze(self.data, np.float32)
        if not np.isfinite(arr).all():
            raise ValueError("ScalarGrid values must be finite")
        object.__setattr__(self, "data", arr)

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]

    def __eq__(self, other):
        return isinstance(other, ScalarGrid) and np.array_equal(self.data, other.data)


@dataclass(frozen=True)
class BinaryMask:
    """Boolean raster with the same layout conventions as ScalarGrid."""

    data: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "data", _freeze(self.data, np.bool_))

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]

    def complement(self) -> "BinaryMask":
        return BinaryMask(~self.data)

    def __eq__(self, other):
        return isinstance(other, BinaryMask) and np.array_equal(self.data, other.data)


@dataclass(frozen=True)
class LabelGrid:
    """Integer component labels: 0 = unlabeled, 1..K = component ids.

    `connectivity` records the adjacency the components were built under so
    crops can re-run the same labeling.
    """

    data: np.ndarray
    component_count: int
    connectivity: int = 4

    def __post_init__(self):
        arr = _freeze(self.data, np.int32)
        k = int(self.component_count)
        if self.connectivity not in (4, 8):
            raise ValueError("connectivity must be 4 or 8")
        if arr.min() < 0 or arr.max() > k:
            raise ValueError("labels must lie in [0, component_count]")
        if k:
            present = np.bincount(arr.ravel(), minlength=k + 1)[1:]
            if not present.all():
                raise ValueError("every label in 1..K must occur at least once")
        object.__setattr__(self, "data", arr)
        object.__setattr__(self, "component_count", k)

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]

    def __eq__(self, other):
        return (
            isinstance(other, LabelGrid)
            and self.component_count == other.component_count
            and np.array_equal(self.data, other.data)
        )


class WindowSpec(NamedTuple):
    """Axis-aligned window, origin (x0, y0), extent w x h, inside the parent."""

    x0: int
    y0: int
    w: int
    h: int


Grid = ScalarGrid | BinaryMask | LabelGrid


def dilate(mask: BinaryMask, radius: float) -> BinaryMask:
    """Dilate with a Euclidean disk: true iff a true pixel lies within `radius`."""
    if radius < 0:
        raise ValueError("radius must be >= 0")
    if radius == 0 or not mask.data.any():
        return mask
    sq = edt_squared(mask.data)
    return BinaryMask(sq <= float(radius) * float(radius))


def distance_transform(mask: BinaryMask) -> ScalarGrid:
    """Exact Euclidean distance (pixels) to the nearest true pixel.

    All-false masks get the sentinel width+height everywhere, which exceeds
    the grid diagonal; callers cap with their dmax.
    """
    if not mask.data.any():
        sentinel = float(mask.width + mask.height)
        return ScalarGrid(np.full((mask.height, mask.width), sentinel, np.float32))
    sq = edt_squared(mask.data)
    return ScalarGrid(np.sqrt(sq.astype(np.float64)).astype(np.float32))


def connected_components(mask: BinaryMask, connectivity: int = 4) -> LabelGrid:
    """Label connected components of true pixels.

    Labels are deterministic: the component whose first pixel appears earliest
    in raster-scan order gets label 1, the next new component label 2, etc.
    """
    if connectivity == 4:
        structure = _STRUCT_4
    elif connectivity == 8:
        structure = _STRUCT_8
    else:
        raise ValueError("connectivity must be 4 or 8")
    raw, k = ndi.label(mask.data, structure=structure)
    if k == 0:
        return LabelGrid(raw, 0, connectivity)
    # enforce raster-scan first-encounter numbering regardless of labeler internals
    flat = raw.ravel()
    nz = np.flatnonzero(flat)
    uniq, first = np.unique(flat[nz], return_index=True)
    remap = np.zeros(k + 1, dtype=np.int32)
    remap[uniq[np.argsort(first, kind="stable")]] = np.arange(1, k + 1, dtype=np.int32)
    return LabelGrid(remap[raw], k, connectivity)


def tile(width: int, height: int, win: int) -> list[WindowSpec]:
    """Disjoint win x win windows covering the extent, boundary ones clipped."""
    if win < 2:
        raise ValueError("window size must be >= 2")
    if width < 1 or height < 1:
        raise ValueError("extent must be at least 1x1")
    out = []
    for y0 in range(0, height, win):
        for x0 in range(0, width, win):
            out.append(WindowSpec(x0, y0, min(win, width - x0), min(win, height - y0)))
    return out


def crop(grid: Grid, win: WindowSpec):
    """Copy a window out of a grid.

    LabelGrid crops re-run component labeling inside the window (a component
    severed by the boundary becomes several labels; numbering restarts at 1).
    """
    if (
        win.w < 1
        or win.h < 1
        or win.x0 < 0
        or win.y0 < 0
        or win.x0 + win.w > grid.width
        or win.y0 + win.h > grid.height
    ):
        raise ValueError(f"window {win} not inside {grid.width}x{grid.height} grid")
    view = grid.data[win.y0 : win.y0 + win.h, win.x0 : win.x0 + win.w]
    if isinstance(grid, ScalarGrid):
        return ScalarGrid(view)
    if isinstance(grid, BinaryMask):
        return BinaryMask(view)
    return connected_components(BinaryMask(view > 0), grid.connectivity)
