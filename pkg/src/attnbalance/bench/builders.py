"""Builders for the three multi-image question sets.

Every builder is a pure function of (inputs, seed): sampling runs on a
generator derived from the seed and the builder name, instances are
deduplicated, shuffled once, and numbered, so regeneration is byte-stable.
Requested totals split into ceil(total/2) yes and floor(total/2) no.

Negative probes for the existence set follow the usual taxonomy over the
supplied pool itself: *random* picks uniformly among objects absent from at
least one sampled image, *popular* picks the most frequent such object
pool-wide, and *adversarial* picks the absent object that co-occurs most
with the sampled images' present objects. Ties break toward the
lexicographically smallest label.
"""

from __future__ import annotations

from collections import Counter
from typing import Optional, Sequence

import numpy as np

from ..errors import ConfigError, DataError
from ..seeding import rng_for
from .annotations import AnnotationRecord, SimilarityMatrix
from .instances import (
    NO,
    TASK_COUNT,
    TASK_EXISTENCE,
    TASK_IDENTITY,
    YES,
    QAInstance,
    count_question,
    existence_question,
    identity_question,
)

SUBTYPE_RANDOM = "random"
SUBTYPE_POPULAR = "popular"
SUBTYPE_ADVERSARIAL = "adversarial"
EXISTENCE_SUBTYPES = (SUBTYPE_RANDOM, SUBTYPE_POPULAR, SUBTYPE_ADVERSARIAL)

MAX_COUNT = 3

_ATTEMPT_FACTOR = 200


def _split_total(total: int) -> tuple[int, int]:
    return total - total // 2, total // 2


def _pick(rng: np.random.Generator, items: Sequence):
    return items[int(rng.integers(len(items)))]


def _sample(rng: np.random.Generator, items: Sequence, k: int) -> list:
    idx = rng.permutation(len(items))[:k]
    return [items[int(i)] for i in idx]


def _shuffled(rng: np.random.Generator, items: list) -> list:
    order = rng.permutation(len(items))
    return [items[int(i)] for i in order]


class _Pool:
    """Presence/count indexes over an annotation pool."""

    def __init__(self, annotations: Sequence[AnnotationRecord]):
        if not annotations:
            raise DataError("annotation pool is empty")
        seen = set()
        for rec in annotations:
            if rec.image_id in seen:
                raise DataError(f"duplicate image id {rec.image_id!r} in annotation pool")
            seen.add(rec.image_id)
        self.records = {rec.image_id: rec for rec in annotations}
        self.presence = {rec.image_id: rec.present_labels() for rec in annotations}
        self.label_images: dict[str, list[str]] = {}
        for rec in annotations:
            for label in rec.present_labels():
                self.label_images.setdefault(label, []).append(rec.image_id)
        for label in self.label_images:
            self.label_images[label].sort()
        self.labels = sorted(self.label_images)
        self._cooc: Optional[dict[str, Counter]] = None

    def frequency(self, label: str) -> int:
        return len(self.label_images.get(label, ()))

    def cooccurrence(self) -> dict[str, Counter]:
        if self._cooc is None:
            cooc: dict[str, Counter] = {label: Counter() for label in self.labels}
            for present in self.presence.values():
                for a in present:
                    for b in present:
                        if a != b:
                            cooc[a][b] += 1
            self._cooc = cooc
        return self._cooc

    def absent_somewhere(self, image_ids: Sequence[str]) -> list[str]:
        return [
            label
            for label in self.labels
            if any(label not in self.presence[image_id] for image_id in image_ids)
        ]


def _pick_negative_object(
    pool: _Pool, subtype: str, image_ids: Sequence[str], rng: np.random.Generator
) -> Optional[str]:
    candidates = pool.absent_somewhere(image_ids)
    if not candidates:
        return None
    if subtype == SUBTYPE_RANDOM:
        return _pick(rng, candidates)
    if subtype == SUBTYPE_POPULAR:
        return min(candidates, key=lambda o: (-pool.frequency(o), o))
    cooc = pool.cooccurrence()
    scores = {
        o: sum(cooc[o][p] for image_id in image_ids for p in pool.presence[image_id])
        for o in candidates
    }
    return min(candidates, key=lambda o: (-scores[o], o))


def build_existence_set(
    annotations: Sequence[AnnotationRecord],
    subtype: str,
    per_subtype: int,
    seed: int,
    group_size: int = 3,
    id_prefix: Optional[str] = None,
) -> list[QAInstance]:
    """Balanced existence questions over ``group_size``-image tuples.

    Positives probe an object present in all sampled images; negatives
    sample a related image group and probe an object absent from at least
    one of its images, chosen per ``subtype``.
    """
    if subtype not in EXISTENCE_SUBTYPES:
        raise ConfigError(f"unknown existence subtype {subtype!r}")
    if per_subtype < 0:
        raise ConfigError("per_subtype must be >= 0")
    if group_size < 2:
        raise ConfigError("existence questions need at least 2 images")
    pool = _Pool(annotations)
    rng = rng_for(seed, "existence", subtype, group_size)
    n_yes, n_no = _split_total(per_subtype)
    anchors = [o for o in pool.labels if pool.frequency(o) >= group_size]
    if per_subtype and not anchors:
        raise DataError(
            f"existence/{subtype}: no object appears in {group_size} or more images, "
            f"cannot sample {group_size}-image groups"
        )
    seen: set = set()
    positives: list[QAInstance] = []
    negatives: list[QAInstance] = []
    budget = _ATTEMPT_FACTOR * max(per_subtype, 1)
    while len(positives) < n_yes:
        if budget <= 0:
            raise DataError(
                f"existence/{subtype}: exhausted sampling budget with "
                f"{len(positives)}/{n_yes} positives built; pool too small or repetitive"
            )
        budget -= 1
        obj = _pick(rng, anchors)
        images = _sample(rng, pool.label_images[obj], group_size)
        key = (obj, tuple(images))
        if key in seen:
            continue
        seen.add(key)
        positives.append(
            QAInstance(
                id="pending",
                task=TASK_EXISTENCE,
                image_ids=tuple(images),
                question=existence_question(obj, group_size),
                gold=YES,
                meta={"subtype": subtype, "object": obj, "labels": [1] * group_size},
            )
        )
    while len(negatives) < n_no:
        if budget <= 0:
            raise DataError(
                f"existence/{subtype}: exhausted sampling budget with "
                f"{len(negatives)}/{n_no} negatives built; no absent probe objects available"
            )
        budget -= 1
        anchor = _pick(rng, anchors)
        images = _sample(rng, pool.label_images[anchor], group_size)
        obj = _pick_negative_object(pool, subtype, images, rng)
        if obj is None:
            continue
        key = (obj, tuple(images))
        if key in seen:
            continue
        seen.add(key)
        labels = [int(obj in pool.presence[image_id]) for image_id in images]
        negatives.append(
            QAInstance(
                id="pending",
                task=TASK_EXISTENCE,
                image_ids=tuple(images),
                question=existence_question(obj, group_size),
                gold=NO,
                meta={"subtype": subtype, "object": obj, "labels": labels},
            )
        )
    prefix = id_prefix or f"existence-{subtype}"
    return _finalize(rng, positives + negatives, prefix)


def _finalize(rng: np.random.Generator, instances: list[QAInstance], prefix: str) -> list[QAInstance]:
    shuffled = _shuffled(rng, instances)
    return [
        QAInstance(
            id=f"{prefix}-{i:06d}",
            task=inst.task,
            image_ids=inst.image_ids,
            question=inst.question,
            gold=inst.gold,
            meta=inst.meta,
        )
        for i, inst in enumerate(shuffled)
    ]


def build_count_set(
    annotations: Sequence[AnnotationRecord], total: int, seed: int
) -> list[QAInstance]:
    """Balanced count-equality questions over image pairs.

    A quarter of the requested total are positives where neither image holds
    the object, and another quarter are negatives where exactly one image
    lacks it; the remaining positives/negatives have both counts in
    1..3 (equal or unequal). Images counting more than 3 instances of the
    object are never candidates.
    """
    if total < 0:
        raise ConfigError("total must be >= 0")
    pool = _Pool(annotations)
    rng = rng_for(seed, "count")
    n_yes, n_no = _split_total(total)
    quarter = total // 4
    quota = {
        "double-absent": min(quarter, n_yes),
        "single-absent": min(quarter, n_no),
    }
    quota["equal-present"] = n_yes - quota["double-absent"]
    quota["unequal-present"] = n_no - quota["single-absent"]

    all_images = sorted(pool.records)
    buckets: dict[str, dict[int, list[str]]] = {}
    for label in pool.labels:
        per_count: dict[int, list[str]] = {c: [] for c in range(MAX_COUNT + 1)}
        for image_id in all_images:
            count = pool.records[image_id].effective_count(label)
            if count <= MAX_COUNT:
                per_count[count].append(image_id)
        buckets[label] = per_count

    def feasible(category: str, label: str) -> bool:
        b = buckets[label]
        if category == "double-absent":
            return len(b[0]) >= 2
        if category == "single-absent":
            return len(b[0]) >= 1 and any(len(b[c]) >= 1 for c in range(1, MAX_COUNT + 1))
        if category == "equal-present":
            return any(len(b[c]) >= 2 for c in range(1, MAX_COUNT + 1))
        pairs = [
            (c1, c2)
            for c1 in range(1, MAX_COUNT + 1)
            for c2 in range(1, MAX_COUNT + 1)
            if c1 != c2 and b[c1] and b[c2]
        ]
        return bool(pairs)

    candidates = {
        category: [label for label in pool.labels if feasible(category, label)]
        for category in quota
    }
    for category, need in quota.items():
        if need > 0 and not candidates[category]:
            raise DataError(
                f"count: composition infeasible, no object supports the "
                f"{category} category (need {need} instances)"
            )

    seen: set = set()
    built: list[QAInstance] = []
    budget = _ATTEMPT_FACTOR * max(total, 1)
    for category, need in quota.items():
        made = 0
        while made < need:
            if budget <= 0:
                raise DataError(
                    f"count: exhausted sampling budget at category {category} "
                    f"({made}/{need} built); pool too small for the composition"
                )
            budget -= 1
            label = _pick(rng, candidates[category])
            b = buckets[label]
            if category == "double-absent":
                pair = _sample(rng, b[0], 2)
                counts = (0, 0)
            elif category == "equal-present":
                options = [c for c in range(1, MAX_COUNT + 1) if len(b[c]) >= 2]
                if not options:
                    continue
                c = int(_pick(rng, options))
                pair = _sample(rng, b[c], 2)
                counts = (c, c)
            elif category == "single-absent":
                options = [c for c in range(1, MAX_COUNT + 1) if b[c]]
                if not b[0] or not options:
                    continue
                c = int(_pick(rng, options))
                pair = [_pick(rng, b[0]), _pick(rng, b[c])]
                counts = (0, c)
                if rng.random() < 0.5:
                    pair.reverse()
                    counts = (c, 0)
            else:
                pairs = [
                    (c1, c2)
                    for c1 in range(1, MAX_COUNT + 1)
                    for c2 in range(1, MAX_COUNT + 1)
                    if c1 != c2 and b[c1] and b[c2]
                ]
                if not pairs:
                    continue
                c1, c2 = _pick(rng, pairs)
                pair = [_pick(rng, b[c1]), _pick(rng, b[c2])]
                counts = (c1, c2)
            if pair[0] == pair[1]:
                continue
            key = (label, pair[0], pair[1])
            if key in seen:
                continue
            seen.add(key)
            built.append(
                QAInstance(
                    id="pending",
                    task=TASK_COUNT,
                    image_ids=tuple(pair),
                    question=count_question(label),
                    gold=YES if counts[0] == counts[1] else NO,
                    meta={"object": label, "counts": list(counts), "category": category},
                )
            )
            made += 1
    return _finalize(rng, built, "count")


def build_identity_set(
    view_groups: dict[str, Sequence[str]],
    sim: SimilarityMatrix,
    total: int,
    seed: int,
    seq_len: int = 4,
    distractor_position: Optional[int] = None,
    id_prefix: str = "identity",
) -> list[QAInstance]:
    """Balanced identity-consistency questions over multi-view groups.

    Positives sample ``seq_len`` views of one object. Negatives sample
    ``seq_len - 1`` views and insert the most dissimilar image from a
    different group (lowest mean similarity to the sampled views, ties to
    the lexicographically smallest id) at a seeded uniform position, or at
    ``distractor_position`` (1-based) when fixed.
    """
    if total < 0:
        raise ConfigError("total must be >= 0")
    if seq_len < 2:
        raise ConfigError(f"identity questions need at least 2 images, got seq_len={seq_len}")
    if distractor_position is not None and not 1 <= distractor_position <= seq_len:
        raise ConfigError(
            f"distractor_position must be in 1..{seq_len}, got {distractor_position}"
        )
    groups = {str(obj): sorted(str(v) for v in views) for obj, views in view_groups.items()}
    for obj, views in groups.items():
        if len(views) != len(set(views)):
            raise DataError(f"view group {obj!r} repeats an image id")
    rng = rng_for(seed, "identity", seq_len, distractor_position or 0)
    n_yes, n_no = _split_total(total)
    eligible = sorted(obj for obj, views in groups.items() if len(views) >= seq_len)
    if total and not eligible:
        raise DataError(f"identity: no view group has {seq_len} or more views")
    if n_no and len(groups) < 2:
        raise DataError("identity: negatives need at least two view groups")
    all_views = sorted(v for views in groups.values() for v in views)
    for view in all_views:
        if not sim.has(view):
            raise DataError(f"identity: similarity matrix lacks a row for image {view!r}")

    seen: set = set()
    built: list[QAInstance] = []
    budget = _ATTEMPT_FACTOR * max(total, 1)
    while sum(1 for inst in built if inst.gold == YES) < n_yes:
        if budget <= 0:
            raise DataError("identity: exhausted sampling budget building positives")
        budget -= 1
        obj = _pick(rng, eligible)
        views = _sample(rng, groups[obj], seq_len)
        key = (obj, tuple(views))
        if key in seen:
            continue
        seen.add(key)
        built.append(
            QAInstance(
                id="pending",
                task=TASK_IDENTITY,
                image_ids=tuple(views),
                question=identity_question(obj, seq_len),
                gold=YES,
                meta={"object": obj, "distractor_id": None, "distractor_position": None},
            )
        )
    while sum(1 for inst in built if inst.gold == NO) < n_no:
        if budget <= 0:
            raise DataError("identity: exhausted sampling budget building negatives")
        budget -= 1
        obj = _pick(rng, eligible)
        views = _sample(rng, groups[obj], seq_len - 1)
        outsiders = [v for other, vs in groups.items() if other != obj for v in vs]
        if not outsiders:
            raise DataError("identity: no distractor candidates outside the target group")
        scores = {candidate: sim.mean_score(candidate, views) for candidate in sorted(outsiders)}
        distractor = min(sorted(outsiders), key=lambda c: (scores[c], c))
        position = distractor_position or int(rng.integers(1, seq_len + 1))
        sequence = list(views)
        sequence.insert(position - 1, distractor)
        key = (obj, tuple(sequence))
        if key in seen:
            continue
        seen.add(key)
        built.append(
            QAInstance(
                id="pending",
                task=TASK_IDENTITY,
                image_ids=tuple(sequence),
                question=identity_question(obj, seq_len),
                gold=NO,
                meta={
                    "object": obj,
                    "distractor_id": distractor,
                    "distractor_position": position,
                },
            )
        )
    return _finalize(rng, built, id_prefix)
