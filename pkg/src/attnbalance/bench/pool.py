"""Synthetic annotation pools for demos and tests.

These generators produce inputs rich enough for every builder quota at the
default totals; they do not try to look like real detector output beyond
the fields the builders consume.
"""

from __future__ import annotations

from pathlib import Path

from ..seeding import rng_for
from .annotations import (
    AnnotationRecord,
    SimilarityMatrix,
    write_annotations_jsonl,
    write_similarity_csv,
)

OBJECT_LABELS = (
    "airplane", "apple", "backpack", "banana", "bench", "bicycle", "bird", "boat",
    "book", "bottle", "bowl", "bus", "cake", "car", "cat", "chair", "clock",
    "couch", "cow", "cup", "dog", "donut", "elephant", "fork", "giraffe",
    "handbag", "horse", "kite", "knife", "laptop", "microwave", "motorcycle",
    "orange", "oven", "person", "pizza", "remote", "sandwich", "scissors",
    "sheep", "sink", "skateboard", "spoon", "suitcase", "surfboard", "television",
    "toaster", "train", "truck", "umbrella", "vase", "zebra",
)


def synthesize_annotation_pool(
    seed: int,
    n_images: int = 420,
    labels: tuple[str, ...] = OBJECT_LABELS,
    min_objects: int = 3,
    max_objects: int = 8,
) -> list[AnnotationRecord]:
    """Images with 3..8 present objects (confidence >= 0.5, counts 1..3),
    plus occasional sub-threshold detections."""
    rng = rng_for(seed, "pool", n_images)
    records = []
    for i in range(n_images):
        k = int(rng.integers(min_objects, max_objects + 1))
        chosen = rng.permutation(len(labels))[:k]
        objects = {}
        for idx in chosen:
            conf = 0.5 + 0.5 * float(rng.random())
            count = int(rng.integers(1, 4))
            objects[labels[int(idx)]] = (conf, count)
        if rng.random() < 0.3:
            extras = [labels[int(j)] for j in rng.permutation(len(labels)) if labels[int(j)] not in objects]
            objects[extras[0]] = (0.49 * float(rng.random()), int(rng.integers(0, 4)))
        records.append(AnnotationRecord(image_id=f"img-{i:05d}", objects=objects))
    return records


def synthesize_view_pool(
    seed: int,
    n_groups: int = 48,
    views_per_group: int = 6,
    labels: tuple[str, ...] = OBJECT_LABELS,
) -> tuple[list[AnnotationRecord], SimilarityMatrix]:
    """Multi-view groups (one object each) plus a seeded similarity matrix.

    Within-group similarities sit around 0.78, cross-group around 0.25, so
    "most dissimilar from a different group" is always well defined.
    """
    if n_groups > len(labels):
        raise ValueError(f"at most {len(labels)} groups supported, got {n_groups}")
    rng = rng_for(seed, "view-pool", n_groups, views_per_group)
    records = []
    ids = []
    owners = []
    for g in range(n_groups):
        label = labels[g]
        for v in range(views_per_group):
            image_id = f"{label}-view{v}"
            ids.append(image_id)
            owners.append(g)
            records.append(AnnotationRecord(image_id=image_id, objects={label: (1.0, 1)}))
    size = len(ids)
    raw = rng.normal(0.25, 0.08, size=(size, size))
    for i in range(size):
        for j in range(size):
            if owners[i] == owners[j]:
                raw[i, j] += 0.53
    scores = (raw + raw.T) / 2.0
    scores = scores.clip(0.0, 1.0)
    for i in range(size):
        scores[i, i] = 1.0
    matrix = SimilarityMatrix(ids=tuple(ids), scores=scores, symmetric=True)
    return records, matrix


def write_demo_inputs(out_dir, seed: int = 0) -> dict[str, Path]:
    """Write annotations.jsonl, views.jsonl, and similarity.csv for the CLI."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "annotations": out / "annotations.jsonl",
        "views": out / "views.jsonl",
        "similarity": out / "similarity.csv",
    }
    write_annotations_jsonl(paths["annotations"], synthesize_annotation_pool(seed))
    view_records, matrix = synthesize_view_pool(seed)
    write_annotations_jsonl(paths["views"], view_records)
    write_similarity_csv(paths["similarity"], matrix)
    return paths
