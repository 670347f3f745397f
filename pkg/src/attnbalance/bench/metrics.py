"""Answer parsing, prediction records, and the five-metric evaluation report.

Yes is the positive class. Unparseable answers are always scored as
incorrect and reported separately: they count as false negatives when gold
is yes, and as plain misses (neither tn nor fp) when gold is no, so they
drag accuracy down without inflating precision. Metrics are stored as
percentages and serialized with two decimals.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

from ..errors import DataError, DimensionError, DomainError, InvariantError
from .instances import NO, YES

UNPARSEABLE = "unparseable"

PREDICTIONS_SCHEMA = "attnbalance-predictions/1"

_LEADING = re.compile(r"^[^a-zA-Z0-9]*(yes|no)\b", re.IGNORECASE)
_STANDALONE = re.compile(r"\b(yes|no)\b", re.IGNORECASE)


def parse_answer(raw: str) -> str:
    """Map free text to yes/no/unparseable.

    A leading affirmation or negation (after stripping punctuation and
    whitespace) wins; otherwise the first standalone yes/no word anywhere in
    the text; otherwise unparseable.
    """
    match = _LEADING.match(raw) or _STANDALONE.search(raw)
    if match:
        return match.group(1).lower()
    return UNPARSEABLE


@dataclass(frozen=True)
class PredictionRecord:
    """One responder output for one instance."""

    instance_id: str
    raw_text: str
    parsed: Optional[str] = None
    image_ratios: Optional[tuple[float, ...]] = None

    def __post_init__(self):
        expected = parse_answer(self.raw_text)
        if self.parsed is None:
            object.__setattr__(self, "parsed", expected)
        elif self.parsed != expected:
            raise InvariantError(
                f"prediction {self.instance_id}: parsed={self.parsed!r} "
                f"disagrees with parse_answer -> {expected!r}"
            )
        if self.image_ratios is not None:
            object.__setattr__(self, "image_ratios", tuple(float(v) for v in self.image_ratios))


@dataclass(frozen=True)
class EvalReport:
    """Confusion counts plus the five headline metrics, as percentages.

    ``undefined`` names metrics whose denominator was zero; those report the
    0.00 sentinel so rows stay totally ordered.
    """

    tp: int
    fp: int
    tn: int
    fn: int
    total: int
    unparseable: int
    accuracy: float
    precision: float
    recall: float
    f1: float
    yes_ratio: float
    undefined: tuple[str, ...] = ()


def compute_metrics(preds: Sequence[PredictionRecord], gold: Sequence[str]) -> EvalReport:
    """Score aligned predictions against gold yes/no labels."""
    if len(preds) != len(gold):
        raise DimensionError(f"{len(preds)} predictions vs {len(gold)} gold labels")
    tp = fp = tn = fn = unparseable = 0
    for pred, truth in zip(preds, gold):
        if truth not in (YES, NO):
            raise DomainError(f"gold label must be yes/no, got {truth!r}")
        answer = pred.parsed
        if answer == UNPARSEABLE:
            unparseable += 1
            if truth == YES:
                fn += 1
        elif answer == YES:
            if truth == YES:
                tp += 1
            else:
                fp += 1
        else:
            if truth == NO:
                tn += 1
            else:
                fn += 1
    total = len(gold)
    undefined: list[str] = []

    def pct(numerator: int, denominator: int, name: str) -> float:
        if denominator == 0:
            undefined.append(name)
            return 0.0
        return 100.0 * numerator / denominator

    accuracy = pct(tp + tn, total, "accuracy")
    precision = pct(tp, tp + fp, "precision")
    recall = pct(tp, tp + fn, "recall")
    if precision + recall > 0.0:
        f1 = 2.0 * precision * recall / (precision + recall)
    else:
        undefined.append("f1")
        f1 = 0.0
    yes_ratio = pct(tp + fp, total, "yes_ratio")
    return EvalReport(
        tp=tp,
        fp=fp,
        tn=tn,
        fn=fn,
        total=total,
        unparseable=unparseable,
        accuracy=accuracy,
        precision=precision,
        recall=recall,
        f1=f1,
        yes_ratio=yes_ratio,
        undefined=tuple(undefined),
    )


def macro_average(reports: Sequence[EvalReport]) -> EvalReport:
    """Arithmetic mean of the five metrics; confusion counts are summed."""
    if not reports:
        raise DataError("cannot average an empty report list")
    k = len(reports)
    return EvalReport(
        tp=sum(r.tp for r in reports),
        fp=sum(r.fp for r in reports),
        tn=sum(r.tn for r in reports),
        fn=sum(r.fn for r in reports),
        total=sum(r.total for r in reports),
        unparseable=sum(r.unparseable for r in reports),
        accuracy=sum(r.accuracy for r in reports) / k,
        precision=sum(r.precision for r in reports) / k,
        recall=sum(r.recall for r in reports) / k,
        f1=sum(r.f1 for r in reports) / k,
        yes_ratio=sum(r.yes_ratio for r in reports) / k,
        undefined=tuple(sorted({name for r in reports for name in r.undefined})),
    )


def report_row(name: str, report: EvalReport) -> dict:
    """Serialization row with Table-style two-decimal percentages."""
    return {
        "name": name,
        "tp": report.tp,
        "fp": report.fp,
        "tn": report.tn,
        "fn": report.fn,
        "total": report.total,
        "unparseable": report.unparseable,
        "accuracy": round(report.accuracy, 2),
        "precision": round(report.precision, 2),
        "recall": round(report.recall, 2),
        "f1": round(report.f1, 2),
        "yes_ratio": round(report.yes_ratio, 2),
        "undefined": list(report.undefined),
    }


def write_predictions(path, records: Sequence[PredictionRecord], manifest_hash: str = "") -> None:
    header = {
        "schema_version": PREDICTIONS_SCHEMA,
        "manifest_hash": manifest_hash,
        "count": len(records),
    }
    lines = [json.dumps(header, ensure_ascii=False, separators=(",", ":"))]
    for rec in records:
        record = {"instance_id": rec.instance_id, "raw_text": rec.raw_text, "parsed": rec.parsed}
        if rec.image_ratios is not None:
            record["image_ratios"] = list(rec.image_ratios)
        lines.append(json.dumps(record, ensure_ascii=False, separators=(",", ":")))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_predictions(path) -> list[PredictionRecord]:
    """Read prediction JSONL: {"instance_id": ..., "raw_text": ...} per line.

    Extra fields are preserved where known and ignored otherwise; a header
    line (with "schema_version") is skipped.
    """
    records: list[PredictionRecord] = []
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read predictions {path}: {exc}") from exc
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            data = json.loads(line)
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
        if "schema_version" in data:
            continue
        try:
            ratios = data.get("image_ratios")
            records.append(
                PredictionRecord(
                    instance_id=str(data["instance_id"]),
                    raw_text=str(data["raw_text"]),
                    image_ratios=tuple(ratios) if ratios is not None else None,
                )
            )
        except (KeyError, TypeError) as exc:
            raise DataError(f"{path}:{lineno}: malformed prediction: {exc}") from exc
    return records
