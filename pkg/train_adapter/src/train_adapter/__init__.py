"""Bridge exposing the roadtopo loss as a batched differentiable operator."""

__version__ = "0.1.0"

from .adapter import (  # noqa: F401
    BatchCache,
    BatchError,
    BatchRequest,
    CacheConsumedError,
    GroundTruthRegistry,
    backward_batch,
    forward_batch,
)
