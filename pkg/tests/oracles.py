"""Brute-force reference implementations used to cross-check the library.

Everything here is a literal, slow transcription of the defining formulas,
written independently of the library's vectorized code paths: per-sample
loops, explicit matrix construction, no shared helpers.
"""

import math


def bin_stats(probs, labels, num_bins):
    """Per-sample scan assigning each prediction to its confidence bin.

    Returns a list of (bin_index, lower, upper, count, accuracy, confidence)
    tuples, one per bin, bins spanning ((m-1)/M, m/M].
    """
    samples = []
    for row, label in zip(probs, labels):
        conf = max(row)
        pred = min(i for i, p in enumerate(row) if p == conf)
        samples.append((conf, 1.0 if pred == label else 0.0))

    stats = []
    for m in range(1, num_bins + 1):
        lower = (m - 1) / num_bins
        upper = m / num_bins
        members = []
        for conf, hit in samples:
            if (lower < conf <= upper) or (m == 1 and conf <= lower):
                members.append((conf, hit))
        count = len(members)
        if count:
            accuracy = sum(hit for _, hit in members) / count
            confidence = sum(conf for conf, _ in members) / count
        else:
            accuracy = confidence = 0.0
        stats.append((m, lower, upper, count, accuracy, confidence))
    return stats


def ece_value(probs, labels, num_bins):
    total = 0.0
    n = len(labels)
    for _, _, _, count, acc, conf in bin_stats(probs, labels, num_bins):
        total += (count / n) * abs(acc - conf)
    return total


def mce_value(probs, labels, num_bins):
    worst = None
    for _, _, _, count, acc, conf in bin_stats(probs, labels, num_bins):
        if count:
            gap = abs(acc - conf)
            worst = gap if worst is None or gap > worst else worst
    return worst


def brier_value(probs, labels):
    total = 0.0
    for row, label in zip(probs, labels):
        for c, f in enumerate(row):
            o = 1.0 if c == label else 0.0
            total += (f - o) ** 2
    return total / len(labels)


def qwk_value(predicted, actual, num_classes):
    n = len(predicted)
    observed = [[0.0] * num_classes for _ in range(num_classes)]
    for p, a in zip(predicted, actual):
        observed[p][a] += 1.0
    pred_hist = [sum(1 for p in predicted if p == i) for i in range(num_classes)]
    act_hist = [sum(1 for a in actual if a == j) for j in range(num_classes)]
    expected = [
        [pred_hist[i] * act_hist[j] / n for j in range(num_classes)]
        for i in range(num_classes)
    ]
    weights = [
        [(i - j) ** 2 / (num_classes - 1) ** 2 for j in range(num_classes)]
        for i in range(num_classes)
    ]
    num = sum(
        weights[i][j] * observed[i][j]
        for i in range(num_classes)
        for j in range(num_classes)
    )
    den = sum(
        weights[i][j] * expected[i][j]
        for i in range(num_classes)
        for j in range(num_classes)
    )
    if den == 0.0:
        return 1.0 if num == 0.0 else math.nan
    return 1.0 - num / den


def mean_vector(vectors):
    """Elementwise average by direct summation."""
    width = len(vectors[0])
    out = []
    for c in range(width):
        total = 0.0
        for v in vectors:
            total += v[c]
        out.append(total / len(vectors))
    return out


def weighted_average_vector(vectors, weights):
    """sum_j w_j * v_j by direct accumulation."""
    width = len(vectors[0])
    out = [0.0] * width
    for v, w in zip(vectors, weights):
        for c in range(width):
            out[c] += w * v[c]
    return out


def llfu_value(y, mu, var):
    """Literal floored log-likelihood uncertainty, no degenerate handling."""
    return max(0.0, 0.5 * math.log(2.0 * math.pi * var)) + (y - mu) ** 2 / (2.0 * var)
