"""Calibration and agreement metrics: ECE, MCE, Brier score, quadratic
weighted kappa, and the reliability-diagram bin data they are built from.

Conventions used throughout:

* confidence of a prediction is its top-class probability ``max_c p[c]``;
* a prediction is correct when its argmax (lowest class index on ties)
  equals the label;
* confidence bins are equal width over (0, 1], left-open / right-closed, so
  confidence 1.0 lands in the last bin;
* empty bins contribute zero to ECE and are excluded from MCE's max;
* the Brier score sums squared deviations over classes, so it lives in
  [0, 2] and a one-hot forecast of a wrong class scores exactly 2.

All functions are pure and order-independent over samples.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class BinStat:
    """Stats for one confidence bin (1-based index, interval (lower, upper])."""

    bin_index: int
    lower: float
    upper: float
    count: int
    accuracy: float
    confidence: float


@dataclass(frozen=True)
class CalibrationReport:
    ece: float
    mce: float
    brier: float
    qwk: float
    bins: tuple
    n: int
    num_bins: int


def _as_probs_labels(probs, labels):
    probs = np.asarray(probs, dtype=float)
    labels = np.asarray(labels, dtype=int)
    if probs.ndim != 2 or probs.shape[0] == 0:
        raise ValueError("no samples")
    if labels.shape != (probs.shape[0],):
        raise ValueError("labels must align with predictions")
    return probs, labels


def compute_bins(probs, labels, num_bins):
    """Assign each sample to a confidence bin and return per-bin stats.

    Bin m covers ((m-1)/M, m/M]. Empty bins are retained with count 0 and
    accuracy = confidence = 0.
    """
    probs, labels = _as_probs_labels(probs, labels)
    if num_bins < 1:
        raise ValueError("num_bins must be >= 1")
    confidence = probs.max(axis=1)
    correct = probs.argmax(axis=1) == labels
    edges = np.arange(1, num_bins + 1) / num_bins
    # first edge >= confidence; the upper edge of bin m is m/M
    idx = np.searchsorted(edges, confidence, side="left")
    idx = np.minimum(idx, num_bins - 1)

    bins = []
    for m in range(num_bins):
        member = idx == m
        count = int(member.sum())
        acc = float(correct[member].mean()) if count else 0.0
        conf = float(confidence[member].mean()) if count else 0.0
        bins.append(BinStat(m + 1, m / num_bins, float(edges[m]), count, acc, conf))
    return bins


def ece(bins, n):
    """Expected calibration error: sum_m (|B_m|/n) * |acc(B_m) - conf(B_m)|.

    The result is clamped into [0, max_m |acc - conf|], its mathematical
    envelope, so 0 <= ECE <= MCE holds bitwise even when float rounding of
    the weighted sum would nudge it past the max term.
    """
    if n <= 0:
        raise ValueError("no samples")
    if sum(b.count for b in bins) != n:
        raise ValueError("bin counts do not sum to n")
    total = 0.0
    worst = 0.0
    for b in bins:
        if b.count:
            gap = abs(b.accuracy - b.confidence)
            total += b.count * gap
            worst = max(worst, gap)
    return min(max(total / n, 0.0), worst)


def mce(bins):
    """Maximum calibration error: max over non-empty bins of |acc - conf|."""
    occupied = [b for b in bins if b.count]
    if not occupied:
        raise ValueError("all bins empty")
    return max(abs(b.accuracy - b.confidence) for b in occupied)


def brier(probs, labels):
    """Mean squared deviation between forecasts and one-hot outcomes."""
    probs, labels = _as_probs_labels(probs, labels)
    diff = probs.copy()
    diff[np.arange(len(labels)), labels] -= 1.0
    return float((diff * diff).sum(axis=1).mean())


def qwk(predicted, actual, num_classes):
    """Quadratic weighted kappa between two ordinal label lists.

    Builds the observed count matrix O, the quadratic penalty matrix
    w[i, j] = (i-j)^2 / (C-1)^2, and the chance matrix E as the outer product
    of the two marginal histograms scaled so sum(E) = sum(O); returns
    1 - sum(w*O)/sum(w*E).  When both lists sit entirely in one identical
    class, agreement is perfect by convention and 1.0 is returned.
    """
    predicted = np.asarray(predicted, dtype=int)
    actual = np.asarray(actual, dtype=int)
    if predicted.size == 0 or predicted.shape != actual.shape:
        raise ValueError("label lists must be equal-length and non-empty")
    if num_classes < 2:
        raise ValueError("num_classes must be >= 2")
    for name, arr in (("predicted", predicted), ("actual", actual)):
        if (arr < 0).any() or (arr >= num_classes).any():
            raise ValueError(f"{name} labels outside [0, {num_classes - 1}]")

    n = predicted.size
    observed = np.zeros((num_classes, num_classes))
    np.add.at(observed, (predicted, actual), 1.0)
    grades = np.arange(num_classes)
    weights = (grades[:, None] - grades[None, :]) ** 2 / (num_classes - 1) ** 2
    expected = np.outer(
        np.bincount(predicted, minlength=num_classes),
        np.bincount(actual, minlength=num_classes),
    ) / n

    weighted_observed = float((weights * observed).sum())
    weighted_expected = float((weights * expected).sum())
    if weighted_expected == 0.0:
        if weighted_observed == 0.0:
            return 1.0
        raise ValueError("degenerate marginals")
    return 1.0 - weighted_observed / weighted_expected


def full_report(pset, aggregated, num_bins):
    """Score aggregated per-sample forecasts against a prediction set's labels.

    ``aggregated`` must be an (n, C) array aligned with the set's sorted
    sample ids.
    """
    dense = pset.dense()
    aggregated = np.asarray(aggregated, dtype=float)
    n = len(dense.sample_ids)
    if aggregated.shape != (n, pset.num_classes):
        raise ValueError("aggregated forecasts must cover every sample in the set")
    bins = compute_bins(aggregated, dense.labels, num_bins)
    return CalibrationReport(
        ece=ece(bins, n),
        mce=mce(bins),
        brier=brier(aggregated, dense.labels),
        qwk=qwk(aggregated.argmax(axis=1), dense.labels, pset.num_classes),
        bins=tuple(bins),
        n=n,
        num_bins=num_bins,
    )
