"""Autograd operator and module wrapper for torch training loops.

Tensors cross the boundary as host copies: (B, H, W) float32 in, per-item
totals out, cached gradient grids replayed in backward. Upstream gradients
are cast to f32 before scaling so an unscaled sum-loss backward reproduces
the kernel gradients bit-for-bit.
"""
from __future__ import annotations

from typing import Sequence

import numpy as np
import torch

from roadtopo import GroundTruth, LossConfig

from .adapter import BatchRequest, backward_batch, forward_batch


class _BatchLoss(torch.autograd.Function):
    @staticmethod
    def forward(ctx, pred: torch.Tensor, ground_truths, config):
        arr = np.ascontiguousarray(
            pred.detach().cpu().numpy(), dtype=np.float32
        )
        req = BatchRequest.from_buffers(arr, ground_truths, config)
        outs, cache = forward_batch(req)
        ctx.cache = cache
        return torch.tensor(
            [out.total for out in outs], dtype=torch.float64, device=pred.device
        )

    @staticmethod
    def backward(ctx, upstream: torch.Tensor):
        scales = upstream.detach().cpu().to(torch.float32).numpy()
        grads = backward_batch(ctx.cache, scales)
        stacked = np.stack([g.data for g in grads])
        return torch.from_numpy(stacked).to(upstream.device), None, None


def batch_loss(
    pred: torch.Tensor,
    ground_truths: Sequence[GroundTruth],
    config: LossConfig | None = None,
) -> torch.Tensor:
    """Per-item totals, shape (B,), differentiable w.r.t. pred."""
    if pred.dim() != 3:
        raise ValueError(f"expected (batch, height, width), got {tuple(pred.shape)}")
    return _BatchLoss.apply(pred, tuple(ground_truths), config or LossConfig())


class ConnectivityLoss(torch.nn.Module):
    """Sum of per-item totals, ready to drop into a training loop.

    Ground truths come from a registry by id so the (expensive) distance
    map / region / label construction happens once per image, not per step.
    """

    def __init__(self, registry, config: LossConfig | None = None):
        super().__init__()
        self.registry = registry
        self.config = config or LossConfig()

    def forward(self, pred: torch.Tensor, keys: Sequence) -> torch.Tensor:
        return batch_loss(pred, self.registry.resolve(keys), self.config).sum()
