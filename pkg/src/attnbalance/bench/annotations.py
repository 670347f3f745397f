"""Annotation records, similarity matrices, and their file formats.

Annotations arrive as JSON Lines, one image per line:

    {"image_id": "img-00042", "objects": {"dog": {"confidence": 0.93, "count": 2}}}

An object counts as present iff its confidence is at least 0.5; counts below
that confidence are treated as zero. Similarity scores arrive as a square
CSV with image ids on the header row and first column; scores are ingested,
never computed here.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from ..errors import DataError, DimensionError, DomainError

PRESENCE_CONFIDENCE = 0.5
SYMMETRY_TOL = 1e-6


@dataclass(frozen=True)
class AnnotationRecord:
    """Detector-style annotation of one image: label -> (confidence, count)."""

    image_id: str
    objects: Mapping[str, tuple[float, int]]

    def __post_init__(self):
        objects = {}
        for label, value in dict(self.objects).items():
            conf, count = float(value[0]), int(value[1])
            if not 0.0 <= conf <= 1.0:
                raise DomainError(f"{self.image_id}/{label}: confidence {conf} outside [0, 1]")
            if count < 0:
                raise DomainError(f"{self.image_id}/{label}: count {count} is negative")
            objects[str(label)] = (conf, count)
        object.__setattr__(self, "objects", objects)
        if not self.image_id:
            raise DataError("annotation record lacks an image id")

    def present_labels(self) -> frozenset:
        return frozenset(
            label for label, (conf, _) in self.objects.items() if conf >= PRESENCE_CONFIDENCE
        )

    def effective_count(self, label: str) -> int:
        conf, count = self.objects.get(label, (0.0, 0))
        return count if conf >= PRESENCE_CONFIDENCE else 0


def load_annotations_jsonl(path) -> list[AnnotationRecord]:
    records = []
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read annotations {path}: {exc}") from exc
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            data = json.loads(line)
            objects = {
                label: (entry["confidence"], entry["count"])
                for label, entry in data["objects"].items()
            }
            records.append(AnnotationRecord(image_id=data["image_id"], objects=objects))
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise DataError(f"{path}:{lineno}: malformed annotation: {exc}") from exc
    if not records:
        raise DataError(f"{path}: no annotation records")
    return records


def write_annotations_jsonl(path, records: Iterable[AnnotationRecord]) -> None:
    lines = []
    for rec in records:
        objects = {
            label: {"confidence": conf, "count": count}
            for label, (conf, count) in sorted(rec.objects.items())
        }
        lines.append(
            json.dumps(
                {"image_id": rec.image_id, "objects": objects},
                ensure_ascii=False,
                separators=(",", ":"),
            )
        )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def view_groups_from_annotations(records: Sequence[AnnotationRecord]) -> dict[str, list[str]]:
    """Group image ids by present label, for multi-view identity inputs."""
    groups: dict[str, list[str]] = {}
    for rec in records:
        for label in rec.present_labels():
            groups.setdefault(label, []).append(rec.image_id)
    return {label: sorted(ids) for label, ids in sorted(groups.items())}


@dataclass
class SimilarityMatrix:
    """Square similarity scores over a set of image ids (higher = more similar)."""

    ids: tuple[str, ...]
    scores: np.ndarray
    symmetric: bool = False

    def __post_init__(self):
        self.ids = tuple(str(i) for i in self.ids)
        self.scores = np.asarray(self.scores, dtype=np.float64)
        if self.scores.ndim != 2 or self.scores.shape[0] != self.scores.shape[1]:
            raise DimensionError(f"similarity matrix must be square, got {self.scores.shape}")
        if self.scores.shape[0] != len(self.ids):
            raise DimensionError("similarity matrix does not match its id set")
        if len(set(self.ids)) != len(self.ids):
            raise DataError("similarity matrix has duplicate image ids")
        if self.symmetric:
            drift = float(np.abs(self.scores - self.scores.T).max()) if self.ids else 0.0
            if drift > SYMMETRY_TOL:
                raise DomainError(f"matrix declared symmetric but drifts by {drift:.3e}")
        self._index = {image_id: i for i, image_id in enumerate(self.ids)}

    def score(self, a: str, b: str) -> float:
        try:
            return float(self.scores[self._index[a], self._index[b]])
        except KeyError as exc:
            raise DataError(f"similarity matrix has no row for image {exc.args[0]!r}") from exc

    def mean_score(self, candidate: str, references: Sequence[str]) -> float:
        return float(np.mean([self.score(candidate, ref) for ref in references]))

    def has(self, image_id: str) -> bool:
        return image_id in self._index


def load_similarity_csv(path, symmetric: bool = False) -> SimilarityMatrix:
    try:
        with open(path, newline="", encoding="utf-8") as handle:
            rows = list(csv.reader(handle))
    except OSError as exc:
        raise DataError(f"cannot read similarity csv {path}: {exc}") from exc
    if len(rows) < 2:
        raise DataError(f"{path}: similarity csv needs a header and at least one row")
    ids = tuple(cell.strip() for cell in rows[0][1:])
    scores = np.zeros((len(ids), len(ids)))
    for i, row in enumerate(rows[1:]):
        if len(row) != len(ids) + 1:
            raise DataError(f"{path}: row {i + 2} has {len(row)} cells, expected {len(ids) + 1}")
        if row[0].strip() != ids[i]:
            raise DataError(f"{path}: row order does not match header order at {row[0]!r}")
        try:
            scores[i] = [float(cell) for cell in row[1:]]
        except ValueError as exc:
            raise DataError(f"{path}: row {i + 2}: {exc}") from exc
    return SimilarityMatrix(ids=ids, scores=scores, symmetric=symmetric)


def write_similarity_csv(path, matrix: SimilarityMatrix) -> None:
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["image_id", *matrix.ids])
        for image_id, row in zip(matrix.ids, matrix.scores):
            writer.writerow([image_id, *(repr(float(v)) for v in row)])
