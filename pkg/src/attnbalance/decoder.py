"""Seeded toy multi-image decoder.

The decoder produces attention tensors with controllable per-image skew so
the under-attended-image failure mode, and its repair by rebalancing, can be
reproduced without any trained model. Token embeddings are pseudo-random
unit vectors keyed by a hash of (seed, role, content, index); two images
with identical content therefore embed identically, which makes symmetry
checks exact. Each layer applies its own seeded query/key projections to the
initial embeddings and takes scaled dot-product softmax attention over the
whole sequence. Hidden states are not propagated between layers and no value
mixing happens: nothing downstream consumes contextualized outputs, only the
attention weights.

The detection readout converts an image's share of visual attention into a
detection probability. ``detection_curve`` receives ``share * n`` (so 1.0
means the image gets exactly its fair share of visual attention, values are
clipped to [0, 1]) and the default step curve fires iff the image holds at
least half its fair share. Objects absent from an image are never detected.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional, Sequence

import numpy as np

from .attention import AttentionTensor, SegmentMap
from .bench.instances import NO, TASK_EXISTENCE, YES, QAInstance
from .bench.metrics import PredictionRecord
from .errors import ConfigError, DataError, DimensionError, DomainError
from .rebalance import RebalanceConfig, rebalance_tensor
from .seeding import child_seed, rng_for

MAX_OBJECT_COUNT = 3


@dataclass(frozen=True)
class DecoderConfig:
    """Shape and seeding of the toy decoder.

    ``skew`` is an additive pre-softmax logit bias applied to the key
    columns of ``skew_target`` (a 0-based image index). Identical config and
    seed give bit-identical tensors. ``readout_all_layers`` switches the
    detection readout from final-layer text rows to an all-layer average.
    """

    layers: int = 2
    heads: int = 4
    model_dim: int = 64
    tokens_per_image: int = 4
    text_tokens: int = 8
    seed: int = 0
    skew: float = 0.0
    skew_target: Optional[int] = None
    readout_all_layers: bool = False

    def __post_init__(self):
        for name in ("layers", "heads", "model_dim", "tokens_per_image", "text_tokens"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.model_dim % self.heads != 0:
            raise ConfigError(
                f"model_dim ({self.model_dim}) must be divisible by heads ({self.heads})"
            )
        if self.skew < 0.0:
            raise ConfigError(f"skew must be >= 0, got {self.skew}")

    def to_dict(self) -> dict:
        return {
            "layers": self.layers,
            "heads": self.heads,
            "model_dim": self.model_dim,
            "tokens_per_image": self.tokens_per_image,
            "text_tokens": self.text_tokens,
            "seed": self.seed,
            "skew": self.skew,
            "skew_target": self.skew_target,
            "readout_all_layers": self.readout_all_layers,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "DecoderConfig":
        known = {f: data[f] for f in cls.__dataclass_fields__ if f in data}
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown decoder config fields: {sorted(unknown)}")
        return cls(**known)


@dataclass(frozen=True)
class SyntheticScene:
    """Ordered images, each a mapping of object label to instance count."""

    images: tuple[Mapping[str, int], ...]
    queried_object: str

    def __post_init__(self):
        images = tuple(dict(img) for img in self.images)
        object.__setattr__(self, "images", images)
        if len(images) < 2:
            raise DomainError("a scene needs at least 2 images")
        for img in images:
            for label, count in img.items():
                if not 0 <= int(count) <= MAX_OBJECT_COUNT:
                    raise DomainError(
                        f"count for {label!r} must be in 0..{MAX_OBJECT_COUNT}, got {count}"
                    )
        if not self.queried_object:
            raise DataError("queried_object is not set")

    def contains(self, image_index: int) -> bool:
        return self.images[image_index].get(self.queried_object, 0) >= 1


@dataclass(frozen=True)
class ReadoutModel:
    """Detection readout: attention share in, detection probability out.

    The curve should map 0 to 0, stay within [0, 1], and be non-decreasing;
    :meth:`curve_is_valid` checks that on a grid. Construction does not
    enforce it, so deliberately degenerate curves (always-on ceilings in
    tests) remain expressible.
    """

    detection_curve: Callable[[float], float] = field(repr=False)
    decision_threshold: float = 0.5

    def __post_init__(self):
        if not 0.0 < self.decision_threshold < 1.0:
            raise ConfigError(
                f"decision_threshold must be in (0, 1), got {self.decision_threshold}"
            )

    @classmethod
    def step(cls, threshold: float = 0.5) -> "ReadoutModel":
        """Detection iff the fair-share fraction reaches ``threshold``."""
        return cls(lambda x: 1.0 if x >= threshold else 0.0, decision_threshold=threshold)

    @classmethod
    def linear(cls, threshold: float = 0.5) -> "ReadoutModel":
        """Detection probability equal to the fair-share fraction."""
        return cls(lambda x: min(max(x, 0.0), 1.0), decision_threshold=threshold)

    def curve_is_valid(self, grid_points: int = 101) -> bool:
        grid = np.linspace(0.0, 1.0, grid_points)
        values = [float(self.detection_curve(x)) for x in grid]
        if abs(values[0]) > 0.0 or values[-1] > 1.0:
            return False
        if any(v < 0.0 or v > 1.0 for v in values):
            return False
        return all(b >= a for a, b in zip(values, values[1:]))


def _image_content_key(image: Mapping[str, int]) -> str:
    present = sorted((label, int(count)) for label, count in image.items() if count >= 1)
    if not present:
        return "<empty>"
    return ";".join(f"{label}={count}" for label, count in present)


def _unit_vector(rng: np.random.Generator, dim: int) -> np.ndarray:
    vec = rng.standard_normal(dim)
    norm = float(np.linalg.norm(vec))
    while norm < 1e-12:
        vec = rng.standard_normal(dim)
        norm = float(np.linalg.norm(vec))
    return vec / norm


def _softmax_rows(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=-1, keepdims=True)


def scene_segment_map(scene: SyntheticScene, config: DecoderConfig) -> SegmentMap:
    return SegmentMap.contiguous(len(scene.images), config.tokens_per_image, config.text_tokens)


def forward(scene: SyntheticScene, config: DecoderConfig) -> AttentionTensor:
    """Run the toy forward pass and return the full attention tensor."""
    n = len(scene.images)
    if config.skew_target is not None and not 0 <= config.skew_target < n:
        raise ConfigError(f"skew_target {config.skew_target} out of range for {n} images")
    segmap = scene_segment_map(scene, config)
    total_tokens = segmap.keys
    emb = np.empty((total_tokens, config.model_dim))
    pos = 0
    for image in scene.images:
        content = _image_content_key(image)
        for t in range(config.tokens_per_image):
            emb[pos] = _unit_vector(rng_for(config.seed, "image-token", content, t), config.model_dim)
            pos += 1
    for t in range(config.text_tokens):
        emb[pos] = _unit_vector(
            rng_for(config.seed, "text-token", scene.queried_object, t), config.model_dim
        )
        pos += 1
    d_head = config.model_dim // config.heads
    scale = 1.0 / math.sqrt(d_head)
    weights = np.empty((config.layers, config.heads, total_tokens, total_tokens))
    for layer in range(config.layers):
        w_q = rng_for(config.seed, "proj-q", layer).standard_normal((config.model_dim, config.model_dim))
        w_k = rng_for(config.seed, "proj-k", layer).standard_normal((config.model_dim, config.model_dim))
        q_all = emb @ w_q.T
        k_all = emb @ w_k.T
        for head in range(config.heads):
            cols = slice(head * d_head, (head + 1) * d_head)
            logits = (q_all[:, cols] @ k_all[:, cols].T) * scale
            if config.skew_target is not None and config.skew > 0.0:
                start, end = segmap.image_spans[config.skew_target]
                logits[:, start:end] += config.skew
            weights[layer, head] = _softmax_rows(logits)
    return AttentionTensor(weights)


def mean_image_shares(
    tensor: AttentionTensor, segmap: SegmentMap, all_layers: bool = False
) -> np.ndarray:
    """Mean per-image share of visual attention over text-query rows.

    Shares are computed per row as image mass / total visual mass, then
    averaged over heads, text rows, and either the final layer (default) or
    all layers. The result has one entry per image and sums to 1 whenever
    every row carries visual mass.
    """
    if tensor.keys != segmap.keys:
        raise DimensionError("segment map does not cover the tensor's key axis")
    start, end = segmap.text_span
    if tensor.queries < end:
        raise DimensionError(
            f"tensor has {tensor.queries} query rows, text span ends at {end}"
        )
    layer_slice = slice(None) if all_layers else slice(tensor.layers - 1, tensor.layers)
    rows = tensor.weights[layer_slice, :, start:end, :]
    per_image = np.stack([rows[..., s:e].sum(axis=-1) for s, e in segmap.image_spans], axis=-1)
    total = per_image.sum(axis=-1, keepdims=True)
    shares = np.divide(per_image, total, out=np.zeros_like(per_image), where=total > 0)
    return shares.mean(axis=(0, 1, 2))


def _detect(
    tensor: AttentionTensor,
    segmap: SegmentMap,
    scene: SyntheticScene,
    readout: ReadoutModel,
    seed: int,
    all_layers: bool = False,
) -> tuple[str, np.ndarray]:
    if len(scene.images) != segmap.n_images:
        raise DimensionError(
            f"scene has {len(scene.images)} images, segment map has {segmap.n_images}"
        )
    shares = mean_image_shares(tensor, segmap, all_layers=all_layers)
    n = len(scene.images)
    answer = YES
    for k in range(n):
        if not scene.contains(k):
            answer = NO
            continue
        prob = float(readout.detection_curve(min(max(shares[k] * n, 0.0), 1.0)))
        draw = rng_for(seed, "detect", k).random()
        if not draw < prob:
            answer = NO
    return answer, shares


def answer_existence(
    tensor: AttentionTensor,
    segmap: SegmentMap,
    scene: SyntheticScene,
    readout: ReadoutModel,
    seed: int,
    all_layers: bool = False,
) -> str:
    """Simulated yes/no answer to "is the object in every image?".

    An image counts as detected iff it truly contains the queried object and
    a seeded draw succeeds with probability given by the detection curve at
    the image's mean attention share. The answer is yes iff every image is
    detected, mirroring the conjunction gold label of the existence task.
    """
    if not scene.queried_object:
        raise DataError("queried_object is not set")
    answer, _ = _detect(tensor, segmap, scene, readout, seed, all_layers=all_layers)
    return answer


def scene_from_instance(instance: QAInstance) -> SyntheticScene:
    """Realize an existence instance as a synthetic scene.

    Each image holds the queried object iff its ground-truth label says so,
    plus a background label derived from the image id, so distinct images
    embed differently while repeated image ids embed identically.
    """
    labels = instance.meta.get("labels")
    obj = instance.meta.get("object")
    if labels is None or obj is None:
        raise DataError(f"instance {instance.id} lacks labels/object metadata")
    if len(labels) != len(instance.image_ids):
        raise DataError(f"instance {instance.id}: labels do not align with image ids")
    images = []
    for image_id, flag in zip(instance.image_ids, labels):
        objects = {f"ctx::{image_id}": 1}
        if flag:
            objects[obj] = 1
        images.append(objects)
    return SyntheticScene(tuple(images), obj)


def simulate_suite(
    instances: Sequence[QAInstance],
    config: DecoderConfig,
    readout: ReadoutModel,
    rebalance: Optional[RebalanceConfig] = None,
    attention_sink: Optional[Callable[[str, AttentionTensor, SegmentMap], None]] = None,
) -> list[PredictionRecord]:
    """Run forward (+ optional rebalancing) + the existence readout per instance.

    Only existence-task instances are accepted. Every draw derives from
    (config.seed, instance id), so the suite is reproducible and instances
    may run in any order or in parallel. ``attention_sink``, when given, is
    called with (instance id, tensor, segment map) after any rebalancing,
    e.g. to dump tensors for offline inspection.
    """
    records: list[PredictionRecord] = []
    for instance in instances:
        if instance.task != TASK_EXISTENCE:
            raise DataError(
                f"simulate_suite handles existence instances only, got {instance.task!r} "
                f"(instance {instance.id})"
            )
        scene = scene_from_instance(instance)
        tensor = forward(scene, config)
        segmap = scene_segment_map(scene, config)
        if rebalance is not None:
            tensor = rebalance_tensor(tensor, segmap, rebalance).adjusted
        if attention_sink is not None:
            attention_sink(instance.id, tensor, segmap)
        answer, shares = _detect(
            tensor,
            segmap,
            scene,
            readout,
            seed=child_seed(config.seed, "answer", instance.id),
            all_layers=config.readout_all_layers,
        )
        records.append(
            PredictionRecord(
                instance_id=instance.id,
                raw_text="Yes" if answer == YES else "No",
                parsed=answer,
                image_ratios=tuple(float(s) for s in shares),
            )
        )
    return records
