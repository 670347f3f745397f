"""Attention balancing toolkit.

A rebalancing kernel that equalizes per-image attention mass in multi-image
attention tensors, a seeded toy decoder that reproduces the under-attended
image failure mode at desk scale, and a benchmark kit for building and
scoring yes/no multi-image hallucination probes.
"""

__version__ = "0.1.0"

from .attention import AttentionTensor, SegmentMap, load_attention, save_attention
from .decoder import (
    DecoderConfig,
    ReadoutModel,
    SyntheticScene,
    answer_existence,
    forward,
    mean_image_shares,
    scene_from_instance,
    scene_segment_map,
    simulate_suite,
)
from .errors import (
    BalanceError,
    ConfigError,
    DataError,
    DimensionError,
    DomainError,
    InvariantError,
)
from .rebalance import (
    CLAMP_REDISTRIBUTE,
    CLAMP_RENORMALIZE,
    SCOPE_AGGREGATED,
    SCOPE_PER_ROW,
    RatioVector,
    RebalanceConfig,
    RebalanceOutcome,
    head_eligible,
    rebalance_row,
    rebalance_tensor,
    segment_ratios,
)

__all__ = [
    "AttentionTensor",
    "BalanceError",
    "CLAMP_REDISTRIBUTE",
    "CLAMP_RENORMALIZE",
    "ConfigError",
    "DataError",
    "DecoderConfig",
    "DimensionError",
    "DomainError",
    "InvariantError",
    "RatioVector",
    "ReadoutModel",
    "RebalanceConfig",
    "RebalanceOutcome",
    "SCOPE_AGGREGATED",
    "SCOPE_PER_ROW",
    "SegmentMap",
    "SyntheticScene",
    "__version__",
    "answer_existence",
    "forward",
    "head_eligible",
    "load_attention",
    "mean_image_shares",
    "rebalance_row",
    "rebalance_tensor",
    "save_attention",
    "scene_from_instance",
    "scene_segment_map",
    "segment_ratios",
    "simulate_suite",
]
