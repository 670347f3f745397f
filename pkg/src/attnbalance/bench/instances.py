"""Question instances, gold-label formulas, and the dataset JSONL format.

A dataset file is JSON Lines: one header object carrying the schema version
and the manifest hash of the run that produced it, followed by one instance
per line with a fixed field order, so identical inputs serialize to
identical bytes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from ..errors import DataError, DomainError

YES = "yes"
NO = "no"

TASK_EXISTENCE = "existence"
TASK_COUNT = "count"
TASK_IDENTITY = "identity"
_TASKS = (TASK_EXISTENCE, TASK_COUNT, TASK_IDENTITY)

DATASET_SCHEMA = "attnbalance-dataset/1"

_VOWELS = "aeiou"


@dataclass(frozen=True)
class QAInstance:
    """One yes/no question over an ordered list of images."""

    id: str
    task: str
    image_ids: tuple[str, ...]
    question: str
    gold: str
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "image_ids", tuple(str(i) for i in self.image_ids))
        object.__setattr__(self, "meta", dict(self.meta))
        if self.task not in _TASKS:
            raise DomainError(f"unknown task {self.task!r}")
        if self.gold not in (YES, NO):
            raise DomainError(f"gold must be {YES!r} or {NO!r}, got {self.gold!r}")
        if not self.image_ids:
            raise DomainError("instance needs at least one image id")


def label_existence(labels: Sequence) -> str:
    """Conjunction gold label: yes iff the object is present in every image."""
    if len(labels) == 0:
        raise DomainError("existence label needs at least one per-image truth")
    return YES if all(bool(v) for v in labels) else NO


def label_count(n1: int, n2: int) -> str:
    """Equality gold label: yes iff both images hold the same count (0 = 0 counts)."""
    if n1 < 0 or n2 < 0:
        raise DomainError(f"counts must be >= 0, got ({n1}, {n2})")
    return YES if int(n1) == int(n2) else NO


def article_for(label: str) -> str:
    # Leading-vowel-letter approximation of the phoneme rule.
    return "an" if label[:1].lower() in _VOWELS else "a"


def existence_question(obj: str, n_images: int) -> str:
    return f"Is there {article_for(obj)} {obj} in all {n_images} images?"


def count_question(obj: str) -> str:
    return f"Are there the same number of {obj} in all 2 images?"


def identity_question(obj: str, n_images: int) -> str:
    return f"Is there a same {obj} in all {n_images} images?"


def rederive_gold(instance: QAInstance) -> str:
    """Recompute the gold label from instance metadata.

    Used by audits: a builder is sound iff this matches the stored gold on
    every instance it emits.
    """
    if instance.task == TASK_EXISTENCE:
        labels = instance.meta.get("labels")
        if labels is None:
            raise DataError(f"instance {instance.id} lacks per-image labels")
        return label_existence(labels)
    if instance.task == TASK_COUNT:
        counts = instance.meta.get("counts")
        if counts is None or len(counts) != 2:
            raise DataError(f"instance {instance.id} lacks a count pair")
        return label_count(counts[0], counts[1])
    if instance.meta.get("distractor_id"):
        return NO
    return YES


def instance_to_dict(instance: QAInstance) -> dict:
    return {
        "id": instance.id,
        "task": instance.task,
        "image_ids": list(instance.image_ids),
        "question": instance.question,
        "gold": instance.gold,
        "meta": instance.meta,
    }


def instance_from_dict(data: Mapping) -> QAInstance:
    try:
        return QAInstance(
            id=str(data["id"]),
            task=str(data["task"]),
            image_ids=tuple(data["image_ids"]),
            question=str(data["question"]),
            gold=str(data["gold"]),
            meta=dict(data.get("meta", {})),
        )
    except (KeyError, TypeError) as exc:
        raise DataError(f"malformed instance record: {exc}") from exc


def _dumps(record: dict) -> str:
    return json.dumps(record, ensure_ascii=False, separators=(",", ":"))


def write_dataset(path, instances: Sequence[QAInstance], manifest_hash: str = "") -> None:
    tasks = sorted({inst.task for inst in instances})
    header = {
        "schema_version": DATASET_SCHEMA,
        "manifest_hash": manifest_hash,
        "tasks": tasks,
        "count": len(instances),
    }
    lines = [_dumps(header)]
    lines.extend(_dumps(instance_to_dict(inst)) for inst in instances)
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_dataset(path) -> tuple[dict, list[QAInstance]]:
    """Read a dataset file; returns (header, instances).

    Headerless files (plain instance lines) are accepted for interoperability
    and yield an empty header.
    """
    header: dict = {}
    instances: list[QAInstance] = []
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read dataset {path}: {exc}") from exc
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
        if "schema_version" in record:
            header = record
            continue
        instances.append(instance_from_dict(record))
    return header, instances


def iter_gold(instances: Iterable[QAInstance]) -> list[str]:
    return [inst.gold for inst in instances]
