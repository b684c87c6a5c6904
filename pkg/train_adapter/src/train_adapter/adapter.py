"""Batched forward/backward bridge around the roadtopo loss kernel.

The host framework hands over contiguous f32 buffers (or ready ScalarGrids),
gets back per-item loss breakdowns plus an opaque gradient cache, and later
trades the cache for upstream-scaled gradient grids. Every number is produced
by the same kernel the `roadtopo loss` CLI runs, so forward totals and
upstream=1 gradients are bit-identical to `loss --out-grad` on the same
inputs.

Calls are independent and thread-safe: no state is retained across batches
other than the cache the caller holds, and a cache can be consumed exactly
once.
"""
from __future__ import annotations

import threading
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from roadtopo import GroundTruth, LossBreakdown, LossConfig, ScalarGrid, total_loss


class BatchError(ValueError):
    """Batch-level failure pointing at the offending item."""

    def __init__(self, index: int, message: str):
        self.index = index
        super().__init__(f"item {index}: {message}")


class CacheConsumedError(RuntimeError):
    """A gradient cache was used twice (or never filled)."""


class GroundTruthRegistry:
    """Ground truths registered once by id, shared across training steps.

    Registration is write-once so a step never silently trains against a
    different target than the one an id was first bound to.
    """

    def __init__(self):
        self._lock = threading.Lock()
        self._entries: dict[object, GroundTruth] = {}

    def register(self, key, gt: GroundTruth) -> None:
        if not isinstance(gt, GroundTruth):
            raise TypeError("registry holds GroundTruth values")
        with self._lock:
            if key in self._entries:
                raise ValueError(f"ground truth {key!r} already registered")
            self._entries[key] = gt

    def get(self, key) -> GroundTruth:
        with self._lock:
            try:
                return self._entries[key]
            except KeyError:
                raise KeyError(f"no ground truth registered under {key!r}") from None

    def resolve(self, keys: Sequence) -> tuple[GroundTruth, ...]:
        return tuple(self.get(k) for k in keys)

    def __len__(self) -> int:
        with self._lock:
            return len(self._entries)

    def __contains__(self, key) -> bool:
        with self._lock:
            return key in self._entries


def _validate(
    predictions: tuple[ScalarGrid, ...],
    ground_truths: tuple[GroundTruth, ...],
) -> None:
    if len(predictions) != len(ground_truths):
        raise ValueError(
            f"batch dims inconsistent: {len(predictions)} predictions, "
            f"{len(ground_truths)} ground truths"
        )
    if not predictions:
        raise ValueError("empty batch")
    for i, (pred, gt) in enumerate(zip(predictions, ground_truths)):
        if not isinstance(pred, ScalarGrid):
            raise BatchError(i, "prediction is not a ScalarGrid")
        if not isinstance(gt, GroundTruth):
            raise BatchError(i, "ground truth is not a GroundTruth")
        if (pred.width, pred.height) != (gt.dist.width, gt.dist.height):
            raise BatchError(
                i,
                f"extent mismatch: prediction {pred.width}x{pred.height}, "
                f"ground truth {gt.dist.width}x{gt.dist.height}",
            )


@dataclass(frozen=True)
class BatchRequest:
    """One training step's worth of predictions with their targets.

    Extents may differ across items (each item is evaluated independently);
    within an item the prediction must match its ground truth.
    """

    predictions: tuple[ScalarGrid, ...]
    ground_truths: tuple[GroundTruth, ...]
    config: LossConfig = field(default_factory=LossConfig)

    def __post_init__(self):
        object.__setattr__(self, "predictions", tuple(self.predictions))
        object.__setattr__(self, "ground_truths", tuple(self.ground_truths))
        _validate(self.predictions, self.ground_truths)

    @classmethod
    def from_buffers(
        cls,
        array: np.ndarray,
        ground_truths: Sequence[GroundTruth],
        config: LossConfig | None = None,
    ) -> BatchRequest:
        """Build a request from one contiguous (batch, height, width) buffer."""
        arr = np.asarray(array)
        if arr.ndim != 3:
            raise ValueError(f"expected (batch, height, width), got shape {arr.shape}")
        if arr.dtype != np.float32:
            raise ValueError(f"expected float32 buffer, got {arr.dtype}")
        preds = tuple(ScalarGrid(arr[i]) for i in range(arr.shape[0]))
        return cls(preds, tuple(ground_truths), config or LossConfig())

    def __len__(self) -> int:
        return len(self.predictions)


class BatchCache:
    """Opaque holder for per-item gradient grids; consumed exactly once."""

    __slots__ = ("_grads", "_lock")

    def __init__(self, grads: tuple[ScalarGrid, ...]):
        self._grads = grads
        self._lock = threading.Lock()

    def __len__(self) -> int:
        with self._lock:
            if self._grads is None:
                raise CacheConsumedError("gradient cache already consumed")
            return len(self._grads)

    def _take(self) -> tuple[ScalarGrid, ...]:
        with self._lock:
            grads = self._grads
            if grads is None:
                raise CacheConsumedError("gradient cache already consumed")
            self._grads = None
            return grads


def forward_batch(
    req: BatchRequest, *, threads: int = 1
) -> tuple[tuple[LossBreakdown, ...], BatchCache]:
    """Per-item losses plus the cache backward_batch trades for gradients."""
    _validate(req.predictions, req.ground_truths)
    outs = []
    for i, (pred, gt) in enumerate(zip(req.predictions, req.ground_truths)):
        try:
            outs.append(total_loss(pred, gt, req.config, threads=threads))
        except ValueError as e:
            raise BatchError(i, str(e)) from e
    return tuple(outs), BatchCache(tuple(out.grad for out in outs))


def backward_batch(
    cache: BatchCache, upstream: Sequence[float] | np.ndarray
) -> tuple[ScalarGrid, ...]:
    """upstream[i] × grad_i for each item, in f32.

    Scaling by exactly 1.0 reproduces the cached grids bit-for-bit and
    scaling by powers of two stays exact, so parity with the CLI's
    `--out-grad` survives the chain rule.
    """
    scales = np.asarray(upstream, dtype=np.float32).ravel()
    grads = cache._take()
    if scales.shape != (len(grads),):
        raise ValueError(
            f"upstream has {scales.size} scales for a batch of {len(grads)}"
        )
    if not np.isfinite(scales).all():
        raise ValueError("upstream scales must be finite")
    return tuple(ScalarGrid(g.data * s) for g, s in zip(grads, scales))
