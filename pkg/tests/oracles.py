"""Independent reference implementations used only to cross-check results.

Everything here is written as a direct, loop-based transcription of the
defining formulas, deliberately sharing no code with the package under test.
"""

from __future__ import annotations

import math


def rebalance_row_reference(row, image_spans, alpha, tau, clamp_mode="clamp-redistribute"):
    """Plain-Python transcription of the per-row rebalancing rule.

    ratio_k = sum of the row over image span k
    avg     = (sum_k ratio_k) / n          (only if sum_k ratio_k > tau)
    out[i] += alpha * (avg - ratio_k) / len(span k)   for i in span k

    Negative results are clamped to zero; in redistribute mode the shortfall
    is taken evenly from the remaining tokens of the same span until the
    span is non-negative, in renormalize mode the whole row is rescaled to
    its original sum afterwards.
    """
    row = [float(v) for v in row]
    ratios = [sum(row[s:e]) for (s, e) in image_spans]
    total = sum(ratios)
    if not total > tau:
        return list(row), 0
    if alpha == 0:
        return list(row), 0
    n = len(image_spans)
    avg = total / n
    out = list(row)
    events = 0
    for (s, e), ratio in zip(image_spans, ratios):
        width = e - s
        shift = alpha * (avg - ratio) / width
        vals = [out[i] + shift for i in range(s, e)]
        if clamp_mode == "clamp-renormalize":
            for i, v in enumerate(vals):
                if v < 0:
                    vals[i] = 0.0
                    events += 1
        else:
            while any(v < 0 for v in vals):
                shortfall = -sum(v for v in vals if v < 0)
                events += sum(1 for v in vals if v < 0)
                vals = [0.0 if v < 0 else v for v in vals]
                positive = [i for i, v in enumerate(vals) if v > 0]
                if not positive:
                    break
                cut = shortfall / len(positive)
                for i in positive:
                    vals[i] -= cut
        out[s:e] = vals
    if clamp_mode == "clamp-renormalize" and events:
        target = sum(row)
        current = sum(out)
        out = [v * target / current for v in out]
    return out, events


def confusion_reference(parsed_answers, gold):
    """Loop-based confusion counting; unparseable counts as fn iff gold yes."""
    tp = fp = tn = fn = unparseable = 0
    for answer, truth in zip(parsed_answers, gold):
        if answer == "unparseable":
            unparseable += 1
            if truth == "yes":
                fn += 1
        elif answer == "yes" and truth == "yes":
            tp += 1
        elif answer == "yes" and truth == "no":
            fp += 1
        elif answer == "no" and truth == "no":
            tn += 1
        else:
            fn += 1
    return tp, fp, tn, fn, unparseable


def metrics_reference(parsed_answers, gold):
    """Recompute the five percentage metrics from the confusion counts."""
    tp, fp, tn, fn, unparseable = confusion_reference(parsed_answers, gold)
    total = len(gold)
    accuracy = 100.0 * (tp + tn) / total if total else 0.0
    precision = 100.0 * tp / (tp + fp) if tp + fp else 0.0
    recall = 100.0 * tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    yes_ratio = 100.0 * (tp + fp) / total if total else 0.0
    return {
        "tp": tp, "fp": fp, "tn": tn, "fn": fn, "unparseable": unparseable,
        "accuracy": accuracy, "precision": precision, "recall": recall,
        "f1": f1, "yes_ratio": yes_ratio,
    }


def pearson_reference(xs, ys):
    """Pearson correlation via explicit covariance / sigma computation."""
    n = len(xs)
    mean_x = sum(xs) / n
    mean_y = sum(ys) / n
    cov = sum((x - mean_x) * (y - mean_y) for x, y in zip(xs, ys)) / n
    var_x = sum((x - mean_x) ** 2 for x in xs) / n
    var_y = sum((y - mean_y) ** 2 for y in ys) / n
    if var_x == 0 or var_y == 0:
        return float("nan")
    return cov / math.sqrt(var_x * var_y)


def random_stochastic_case(rng, max_keys=32, max_images=5):
    """One random row-stochastic row plus a span layout over its keys.

    Rows mix smooth dirichlet mass with occasional hard zeros and heavy
    skew so clamping paths get exercised.
    """
    keys = int(rng.integers(3, max_keys + 1))
    n_images = int(rng.integers(1, min(max_images, keys - 1) + 1))
    cuts = sorted(rng.choice(range(1, keys), size=n_images, replace=False).tolist())
    bounds = [0] + cuts + [keys]
    spans = list(zip(bounds[:-1], bounds[1:]))
    text_span = spans[-1]
    image_spans = tuple(spans[:-1])
    row = rng.dirichlet([float(rng.uniform(0.2, 3.0))] * keys)
    if rng.random() < 0.4:
        zero_count = int(rng.integers(1, max(2, keys // 3)))
        idx = rng.choice(keys, size=zero_count, replace=False)
        row[idx] = 0.0
    if rng.random() < 0.4:
        hot = int(rng.integers(keys))
        row[hot] += float(rng.uniform(1.0, 6.0))
    row = row / row.sum()
    return row, image_spans, text_span
