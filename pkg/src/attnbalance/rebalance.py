"""Attention rebalancing across image spans.

For one key-weight row the per-image attention ratio is the row's mass over
that image's span. Rows whose total visual ratio exceeds the eligibility
threshold get every token of image k shifted by ``alpha * delta_k / N_k``,
where ``delta_k`` is the gap between the average per-image ratio and image
k's ratio and ``N_k`` is the span length. The shift is uniform within a
span, so intra-image structure is preserved while per-image totals contract
toward the average; shifts over all spans cancel, so the row sum is
conserved. Text-span weights are never shifted.

Negative results of the shift are handled per ``clamp_mode``:

* ``clamp-redistribute`` (default): clamp the offending token to 0 and pull
  the shortfall evenly from the remaining tokens of the same span, repeating
  until feasible. Preserves both the row sum and the target per-image ratio
  exactly.
* ``clamp-renormalize``: clamp negatives to 0, then rescale the whole row
  (text included) back to its original sum.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .attention import ROW_SUM_TOL, AttentionTensor, SegmentMap
from .errors import ConfigError, DimensionError, DomainError, InvariantError

CLAMP_REDISTRIBUTE = "clamp-redistribute"
CLAMP_RENORMALIZE = "clamp-renormalize"
SCOPE_PER_ROW = "per-row"
SCOPE_AGGREGATED = "aggregated"

_CLAMP_MODES = (CLAMP_REDISTRIBUTE, CLAMP_RENORMALIZE)
_SCOPES = (SCOPE_PER_ROW, SCOPE_AGGREGATED)


@dataclass(frozen=True)
class RebalanceConfig:
    """Knobs for the rebalancing kernel.

    ``alpha`` scales the adjustment (0 = identity, 1 = full equalization).
    ``tau`` is the eligibility threshold on a row's total visual ratio; the
    comparison is strict, so a row at exactly ``tau`` is left alone.
    """

    alpha: float = 0.5
    tau: float = 0.2
    clamp_mode: str = CLAMP_REDISTRIBUTE
    scope: str = SCOPE_PER_ROW

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigError(f"alpha must be in [0, 1], got {self.alpha}")
        if not 0.0 <= self.tau <= 1.0:
            raise ConfigError(f"tau must be in [0, 1], got {self.tau}")
        if self.clamp_mode not in _CLAMP_MODES:
            raise ConfigError(f"clamp_mode must be one of {_CLAMP_MODES}, got {self.clamp_mode!r}")
        if self.scope not in _SCOPES:
            raise ConfigError(f"scope must be one of {_SCOPES}, got {self.scope!r}")


@dataclass(frozen=True)
class RatioVector:
    """Per-image attention ratios for one row (or one aggregated head)."""

    per_image: tuple[float, ...]
    total_visual: float
    avg_ratio: float
    deltas: tuple[float, ...]

    def __post_init__(self):
        n = len(self.per_image)
        if n < 1:
            raise DimensionError("ratio vector needs at least one image")
        if len(self.deltas) != n:
            raise DimensionError("deltas must align with per_image")
        if abs(self.total_visual - sum(self.per_image)) > 1e-12:
            raise DomainError("total_visual does not equal the per-image sum")
        if abs(self.avg_ratio - self.total_visual / n) > 1e-12:
            raise DomainError("avg_ratio does not equal total_visual / n")
        if abs(sum(self.deltas)) > 1e-12:
            raise DomainError("deltas must sum to zero")


@dataclass(frozen=True)
class RebalanceOutcome:
    """Result of rebalancing a whole tensor, with bookkeeping counters."""

    adjusted: AttentionTensor
    rows_touched: int
    rows_skipped_ineligible: int
    clamp_events: int
    max_row_sum_error: float


def segment_ratios(row, segmap: SegmentMap) -> RatioVector:
    """Per-image mass of one key-weight row; text-span mass is excluded."""
    arr = np.asarray(row, dtype=np.float64)
    if arr.ndim != 1:
        raise DimensionError(f"expected a 1-d row, got ndim={arr.ndim}")
    if arr.shape[0] != segmap.keys:
        raise DimensionError(f"row has {arr.shape[0]} keys, segment map covers {segmap.keys}")
    if not np.isfinite(arr).all():
        raise DomainError("row contains non-finite weights")
    if arr.min() < 0.0:
        raise DomainError("row contains negative weights")
    per_image = tuple(float(arr[s:e].sum()) for s, e in segmap.image_spans)
    total = float(sum(per_image))
    avg = total / len(per_image)
    deltas = tuple(avg - r for r in per_image)
    return RatioVector(per_image, total, avg, deltas)


def head_eligible(ratios: RatioVector, config: RebalanceConfig) -> bool:
    """True iff the total visual ratio strictly exceeds the threshold."""
    return ratios.total_visual > config.tau


def _settle_span(values: np.ndarray) -> tuple[np.ndarray, int, float]:
    """Clamp negatives to zero, pulling the shortfall evenly from the rest.

    Returns (settled values, clamp events, leftover). ``leftover`` is the
    reduction that could not be absorbed because the span ran out of mass;
    it is zero whenever the span's target total is non-negative, which is
    always the case for per-row shifts.
    """
    vals = values.copy()
    events = 0
    while True:
        neg = vals < 0.0
        if not neg.any():
            return vals, events, 0.0
        shortfall = float(-vals[neg].sum())
        events += int(neg.sum())
        vals[neg] = 0.0
        pos = np.flatnonzero(vals > 0.0)
        if pos.size == 0:
            return vals, events, shortfall
        vals[pos] -= shortfall / pos.size


def _apply_deltas(
    arr: np.ndarray, segmap: SegmentMap, deltas, config: RebalanceConfig
) -> tuple[np.ndarray, int]:
    """Shift each image span by alpha * delta / width and clamp per mode."""
    out = arr.copy()
    events = 0
    leftover = 0.0
    for (start, end), delta in zip(segmap.image_spans, deltas):
        shifted = out[start:end] + config.alpha * delta / (end - start)
        if config.clamp_mode == CLAMP_RENORMALIZE:
            neg = shifted < 0.0
            if neg.any():
                events += int(neg.sum())
                shifted = np.where(neg, 0.0, shifted)
            out[start:end] = shifted
        else:
            settled, span_events, span_leftover = _settle_span(shifted)
            out[start:end] = settled
            events += span_events
            leftover += span_leftover
    if config.clamp_mode == CLAMP_RENORMALIZE:
        if events:
            out *= arr.sum() / out.sum()
        return out, events
    if leftover > 0.0:
        # A span exhausted (possible only under aggregated-scope shifts,
        # whose deltas were not computed from this row). Take the residue
        # from whatever visual mass remains so the row sum is conserved.
        visual = np.concatenate([np.arange(s, e) for s, e in segmap.image_spans])
        settled, drain_events, residue = _settle_span(out[visual] - leftover / visual.size)
        if residue > 0.0:
            raise InvariantError("row visual mass exhausted while clamping")
        out[visual] = settled
        events += drain_events
    return out, events


def _check_row(arr: np.ndarray, segmap: SegmentMap) -> None:
    if arr.ndim != 1:
        raise DimensionError(f"expected a 1-d row, got ndim={arr.ndim}")
    if arr.shape[0] != segmap.keys:
        raise DimensionError(f"row has {arr.shape[0]} keys, segment map covers {segmap.keys}")
    if not np.isfinite(arr).all():
        raise DomainError("row contains non-finite weights")
    if arr.min() < 0.0:
        raise DomainError("row contains negative weights")
    if abs(arr.sum() - 1.0) > ROW_SUM_TOL:
        raise DomainError(f"row is not stochastic: sum = {arr.sum()!r}")


def rebalance_row(row, segmap: SegmentMap, config: RebalanceConfig) -> tuple[np.ndarray, int]:
    """Rebalance one stochastic key-weight row.

    Returns the adjusted row (always a fresh array) and the number of clamp
    events. Ineligible rows and ``alpha == 0`` return the row unchanged.
    """
    if not isinstance(config, RebalanceConfig):
        raise ConfigError(f"expected a RebalanceConfig, got {type(config).__name__}")
    arr = np.asarray(row, dtype=np.float64)
    _check_row(arr, segmap)
    ratios = segment_ratios(arr, segmap)
    if not head_eligible(ratios, config) or config.alpha == 0.0:
        return arr.copy(), 0
    return _apply_deltas(arr, segmap, ratios.deltas, config)


def _text_query_rows(tensor: AttentionTensor, segmap: SegmentMap) -> range:
    start, end = segmap.text_span
    return range(start, min(end, tensor.queries))


def rebalance_tensor(
    tensor: AttentionTensor, segmap: SegmentMap, config: RebalanceConfig
) -> RebalanceOutcome:
    """Rebalance every text-query row of a tensor.

    With ``scope = per-row`` each (layer, head, text query) row is balanced
    against its own ratios; ``rows_touched + rows_skipped_ineligible`` equals
    the number of candidate rows. With ``scope = aggregated`` the ratios are
    computed once per (layer, head) from the mean of its text rows (so they
    stay comparable to per-row values), eligibility is tested once, and the
    same per-token shift is applied to every text row of that head; the
    counters then count heads. The input tensor is never mutated.
    """
    if not isinstance(config, RebalanceConfig):
        raise ConfigError(f"expected a RebalanceConfig, got {type(config).__name__}")
    if segmap.keys != tensor.keys:
        raise DimensionError(
            f"segment map covers {segmap.keys} keys but tensor has {tensor.keys}"
        )
    adjusted = tensor.weights.copy()
    text_rows = _text_query_rows(tensor, segmap)
    touched = 0
    skipped = 0
    events = 0
    if config.scope == SCOPE_PER_ROW:
        for layer in range(tensor.layers):
            for head in range(tensor.heads):
                for q in text_rows:
                    row = tensor.weights[layer, head, q]
                    ratios = segment_ratios(row, segmap)
                    if not head_eligible(ratios, config):
                        skipped += 1
                        continue
                    touched += 1
                    if config.alpha == 0.0:
                        continue
                    adjusted[layer, head, q], row_events = _apply_deltas(
                        row, segmap, ratios.deltas, config
                    )
                    events += row_events
    elif len(text_rows) > 0:
        for layer in range(tensor.layers):
            for head in range(tensor.heads):
                mean_row = tensor.weights[layer, head, text_rows.start : text_rows.stop].mean(axis=0)
                ratios = segment_ratios(mean_row, segmap)
                if not head_eligible(ratios, config):
                    skipped += 1
                    continue
                touched += 1
                if config.alpha == 0.0:
                    continue
                for q in text_rows:
                    adjusted[layer, head, q], row_events = _apply_deltas(
                        tensor.weights[layer, head, q], segmap, ratios.deltas, config
                    )
                    events += row_events
    max_err = float(np.abs(adjusted.sum(axis=-1) - tensor.weights.sum(axis=-1)).max())
    if max_err > ROW_SUM_TOL:
        raise InvariantError(f"row sums drifted by {max_err:.3e} during rebalancing")
    return RebalanceOutcome(
        adjusted=AttentionTensor(adjusted),
        rows_touched=touched,
        rows_skipped_ineligible=skipped,
        clamp_events=events,
        max_row_sum_error=max_err,
    )
