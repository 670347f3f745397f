"""Analysis sweeps: image-count, negative-position, and negative-ratio.

Each sweep returns a mapping from sweep point to a freshly built dataset,
with every point seeded independently so points can run in parallel.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Sequence

from ..errors import ConfigError, DataError
from ..seeding import child_seed, rng_for
from .annotations import AnnotationRecord, SimilarityMatrix
from .builders import _Pool, _finalize, _pick, _sample, _split_total
from .instances import NO, TASK_EXISTENCE, YES, QAInstance, existence_question

DEFAULT_LENGTHS = (2, 3, 4, 5, 6)


def _build_length_set(
    annotations: Sequence[AnnotationRecord], length: int, per_length: int, seed: int
) -> list[QAInstance]:
    """Balanced existence set at a given sequence length.

    Negative instances put the one image lacking the probe object last, so
    position effects never confound the length effect.
    """
    pool = _Pool(annotations)
    rng = rng_for(seed, "image-count", length)
    n_yes, n_no = _split_total(per_length)
    anchors = [o for o in pool.labels if pool.frequency(o) >= length]
    if per_length and not anchors:
        raise DataError(f"image-count sweep: no object appears in {length} or more images")
    all_images = sorted(pool.records)
    seen: set = set()
    built: list[QAInstance] = []
    budget = 200 * max(per_length, 1)
    while len(built) < n_yes:
        if budget <= 0:
            raise DataError(f"image-count sweep: cannot fill {n_yes} positives at length {length}")
        budget -= 1
        obj = _pick(rng, anchors)
        images = _sample(rng, pool.label_images[obj], length)
        key = (obj, tuple(images))
        if key in seen:
            continue
        seen.add(key)
        built.append(
            QAInstance(
                id="pending",
                task=TASK_EXISTENCE,
                image_ids=tuple(images),
                question=existence_question(obj, length),
                gold=YES,
                meta={"subtype": "length-sweep", "object": obj, "labels": [1] * length,
                      "length": length},
            )
        )
    negatives = 0
    while negatives < n_no:
        if budget <= 0:
            raise DataError(f"image-count sweep: cannot fill {n_no} negatives at length {length}")
        budget -= 1
        obj = _pick(rng, [o for o in anchors if pool.frequency(o) >= length - 1])
        present = _sample(rng, pool.label_images[obj], length - 1)
        lacking = [i for i in all_images if obj not in pool.presence[i]]
        if not lacking:
            continue
        images = present + [_pick(rng, lacking)]
        key = (obj, tuple(images))
        if key in seen:
            continue
        seen.add(key)
        built.append(
            QAInstance(
                id="pending",
                task=TASK_EXISTENCE,
                image_ids=tuple(images),
                question=existence_question(obj, length),
                gold=NO,
                meta={"subtype": "length-sweep", "object": obj,
                      "labels": [1] * (length - 1) + [0], "length": length},
            )
        )
        negatives += 1
    return _finalize(rng, built, f"existence-len{length}")


def sweep_image_count(
    annotations: Sequence[AnnotationRecord],
    lengths: Sequence[int] = DEFAULT_LENGTHS,
    per_length: int = 800,
    seed: int = 0,
) -> dict[int, list[QAInstance]]:
    """One balanced existence dataset per sequence length."""
    datasets: dict[int, list[QAInstance]] = {}
    for length in lengths:
        if length < 2:
            raise ConfigError(f"sequence length must be >= 2, got {length}")
        datasets[int(length)] = _build_length_set(
            annotations, int(length), per_length, child_seed(seed, "image-count", int(length))
        )
    return datasets


def sweep_negative_position(
    view_groups: dict[str, Sequence[str]],
    sim: SimilarityMatrix,
    seq_len: int = 4,
    per_position: int = 800,
    seed: int = 0,
) -> dict[int, list[QAInstance]]:
    """One identity dataset per fixed distractor position 1..seq_len."""
    from .builders import build_identity_set

    if seq_len < 2:
        raise ConfigError(f"seq_len must be >= 2, got {seq_len}")
    datasets: dict[int, list[QAInstance]] = {}
    for position in range(1, seq_len + 1):
        datasets[position] = build_identity_set(
            view_groups,
            sim,
            total=per_position,
            seed=child_seed(seed, "negative-position", position),
            seq_len=seq_len,
            distractor_position=position,
            id_prefix=f"identity-pos{position}",
        )
    return datasets


def sweep_negative_ratio(
    view_groups: dict[str, Sequence[str]],
    sim: SimilarityMatrix,
    positives_per_instance: Sequence[int] = (2, 3, 4, 5),
    per_config: int = 800,
    seed: int = 0,
) -> dict[Fraction, list[QAInstance]]:
    """One identity dataset per negative ratio 1/(m+1).

    Negative instances hold one distractor at the sequence start plus m
    same-object views; positives hold m+1 views, keeping the dataset
    balanced while the per-instance negative ratio shrinks.
    """
    from .builders import build_identity_set

    datasets: dict[Fraction, list[QAInstance]] = {}
    for m in positives_per_instance:
        if m < 1:
            raise ConfigError(
                f"positives per instance must be >= 1 (m={m} gives a single-image instance)"
            )
        ratio = Fraction(1, int(m) + 1)
        datasets[ratio] = build_identity_set(
            view_groups,
            sim,
            total=per_config,
            seed=child_seed(seed, "negative-ratio", int(m)),
            seq_len=int(m) + 1,
            distractor_position=1,
            id_prefix=f"identity-ratio{m}",
        )
    return datasets
