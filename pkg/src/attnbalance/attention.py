"""Attention tensors and key-axis segment maps, plus their interchange format.

The on-disk format is a single JSON document:

.. code-block:: json

    {
      "format": "attnbalance-tensor/1",
      "dims": {"layers": 2, "heads": 4, "queries": 20, "keys": 20},
      "segments": {"image_spans": [[0, 4], [4, 8]], "text_span": [8, 20]},
      "dtype": "float64",
      "encoding": "base64",
      "data": "..."
    }

``data`` holds the weights in row-major (layer, head, query, key) order,
either as base64 of little-endian 64-bit floats or, with ``"encoding":
"csv"``, as one comma-separated line per (layer, head, query) row. Both
encodings round-trip bit-exactly; CSV uses ``repr`` floats.
"""

from __future__ import annotations

import base64
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataError, DimensionError, DomainError

#: Absolute tolerance on |row sum - 1| for a row to count as stochastic.
ROW_SUM_TOL = 1e-9

FORMAT_NAME = "attnbalance-tensor/1"

Span = tuple[int, int]


@dataclass(frozen=True)
class SegmentMap:
    """Partition of the key axis into ordered image spans plus one text span.

    Spans are half-open ``[start, end)`` ranges. They must be pairwise
    disjoint, each non-empty, and together tile ``[0, keys)`` exactly.
    ``image_spans`` keeps the input order of the images (image 1 first).
    """

    image_spans: tuple[Span, ...]
    text_span: Span

    def __post_init__(self):
        spans = tuple((int(s), int(e)) for s, e in self.image_spans)
        text = (int(self.text_span[0]), int(self.text_span[1]))
        object.__setattr__(self, "image_spans", spans)
        object.__setattr__(self, "text_span", text)
        if not spans:
            raise DimensionError("segment map needs at least one image span")
        for start, end in (*spans, text):
            if start < 0 or end <= start:
                raise DimensionError(f"empty or inverted span [{start}, {end})")
        ordered = sorted((*spans, text))
        if ordered[0][0] != 0:
            raise DimensionError("spans must cover the key axis starting at 0")
        for (_, prev_end), (start, _) in zip(ordered, ordered[1:]):
            if start != prev_end:
                kind = "overlap" if start < prev_end else "gap"
                raise DimensionError(f"spans leave a {kind} at key index {min(start, prev_end)}")

    @property
    def n_images(self) -> int:
        return len(self.image_spans)

    @property
    def keys(self) -> int:
        return max(end for _, end in (*self.image_spans, self.text_span))

    @property
    def image_lengths(self) -> tuple[int, ...]:
        return tuple(end - start for start, end in self.image_spans)

    @property
    def text_length(self) -> int:
        return self.text_span[1] - self.text_span[0]

    @classmethod
    def contiguous(cls, n_images: int, tokens_per_image: int, text_tokens: int) -> "SegmentMap":
        """Images laid out first, in order, followed by the text block."""
        spans = tuple(
            (k * tokens_per_image, (k + 1) * tokens_per_image) for k in range(n_images)
        )
        visual = n_images * tokens_per_image
        return cls(spans, (visual, visual + text_tokens))

    def to_dict(self) -> dict:
        return {
            "image_spans": [list(span) for span in self.image_spans],
            "text_span": list(self.text_span),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SegmentMap":
        try:
            spans = tuple((int(s), int(e)) for s, e in data["image_spans"])
            text = tuple(int(v) for v in data["text_span"])
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"malformed segment map: {exc}") from exc
        return cls(spans, text)  # type: ignore[arg-type]


@dataclass(frozen=True)
class AttentionTensor:
    """Dense (layer, head, query, key) attention weights.

    Weights are 64-bit floats in [0, 1] and every (layer, head, query) row
    sums to 1 within :data:`ROW_SUM_TOL`. The array is frozen read-only on
    construction, so tensors can be shared across threads.
    """

    weights: np.ndarray

    def __post_init__(self):
        w = np.array(self.weights, dtype=np.float64, copy=True)
        if w.ndim != 4:
            raise DimensionError(f"expected a 4-d (layer, head, query, key) array, got ndim={w.ndim}")
        if min(w.shape) < 1:
            raise DimensionError(f"all dimensions must be positive, got shape {w.shape}")
        if not np.isfinite(w).all():
            raise DomainError("attention weights must be finite")
        if w.min() < 0.0 or w.max() > 1.0:
            raise DomainError("attention weights must lie in [0, 1]")
        err = np.abs(w.sum(axis=-1) - 1.0).max()
        if err > ROW_SUM_TOL:
            raise DomainError(f"rows are not stochastic: worst |sum - 1| = {err:.3e}")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @property
    def layers(self) -> int:
        return self.weights.shape[0]

    @property
    def heads(self) -> int:
        return self.weights.shape[1]

    @property
    def queries(self) -> int:
        return self.weights.shape[2]

    @property
    def keys(self) -> int:
        return self.weights.shape[3]


def _encode_csv(weights: np.ndarray) -> str:
    rows = weights.reshape(-1, weights.shape[-1])
    return "\n".join(",".join(repr(float(v)) for v in row) for row in rows)


def _decode_csv(block: str, shape: tuple[int, ...]) -> np.ndarray:
    values = [
        [float(cell) for cell in line.split(",")]
        for line in block.splitlines()
        if line.strip()
    ]
    try:
        return np.array(values, dtype=np.float64).reshape(shape)
    except ValueError as exc:
        raise DataError(f"csv block does not match dims {shape}: {exc}") from exc


def save_attention(path, tensor: AttentionTensor, segmap: SegmentMap, encoding: str = "base64") -> None:
    """Write a tensor plus its segment map in the interchange format."""
    if encoding not in ("base64", "csv"):
        raise DataError(f"unknown encoding {encoding!r}")
    if segmap.keys != tensor.keys:
        raise DimensionError(
            f"segment map covers {segmap.keys} keys but tensor has {tensor.keys}"
        )
    if encoding == "base64":
        data = base64.b64encode(tensor.weights.astype("<f8").tobytes()).decode("ascii")
    else:
        data = _encode_csv(tensor.weights)
    doc = {
        "format": FORMAT_NAME,
        "dims": {
            "layers": tensor.layers,
            "heads": tensor.heads,
            "queries": tensor.queries,
            "keys": tensor.keys,
        },
        "segments": segmap.to_dict(),
        "dtype": "float64",
        "encoding": encoding,
        "data": data,
    }
    Path(path).write_text(json.dumps(doc, indent=1) + "\n", encoding="utf-8")


def load_attention(path) -> tuple[AttentionTensor, SegmentMap]:
    """Read back a tensor and segment map written by :func:`save_attention`."""
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read attention file {path}: {exc}") from exc
    if doc.get("format") != FORMAT_NAME:
        raise DataError(f"unsupported attention format {doc.get('format')!r}")
    dims = doc.get("dims", {})
    try:
        shape = tuple(int(dims[k]) for k in ("layers", "heads", "queries", "keys"))
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"malformed dims header: {exc}") from exc
    encoding = doc.get("encoding")
    if encoding == "base64":
        raw = base64.b64decode(doc["data"])
        expected = int(np.prod(shape)) * 8
        if len(raw) != expected:
            raise DataError(f"payload holds {len(raw)} bytes, dims imply {expected}")
        weights = np.frombuffer(raw, dtype="<f8").astype(np.float64).reshape(shape)
    elif encoding == "csv":
        weights = _decode_csv(doc["data"], shape)
    else:
        raise DataError(f"unknown encoding {encoding!r}")
    segmap = SegmentMap.from_dict(doc.get("segments", {}))
    tensor = AttentionTensor(weights)
    if segmap.keys != tensor.keys:
        raise DimensionError("segment map does not cover the tensor's key axis")
    return tensor, segmap
