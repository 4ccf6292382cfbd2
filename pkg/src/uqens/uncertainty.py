"""Per-(sample, model) predictive uncertainty and the inverse-uncertainty
ensemble weights derived from it.

Each model's prediction for a sample is reduced to a scalar grade (the argmax
of its replicate-averaged probabilities).  Its uncertainty combines a floored
log-variance term with the squared deviation of that grade from the ensemble
mode:

    sigma = max(0, 0.5 * log(2*pi*var)) + (y - mu)^2 / (2 * var)

where mu is the mode of the k predicted grades and var their population
variance.  Weights are proportional to 1/sigma (with a floor so certain
models dominate without dividing by zero) and normalized per sample.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import mean_simplex

# Below this the ensemble variance is treated as exactly zero.
EPS_VAR = 1e-12
# Sigma floor applied when inverting uncertainties into weights.
WEIGHT_FLOOR = 1e-6
# Deviation penalty when var ~ 0 but the model disagrees with the mode.
SIGMA_MAX = 1e6


@dataclass(frozen=True, eq=False)
class UncertaintyTable:
    """Write-once per-(sample, model) sigma/weight table with ensemble stats."""

    sample_ids: tuple
    sigma: np.ndarray   # (n, k)
    weight: np.ndarray  # (n, k), rows sum to 1
    mu: np.ndarray      # (n,) mode of the k scalar predictions
    var: np.ndarray     # (n,) population variance of the k scalar predictions


def model_scalar_prediction(replicate_probs):
    """Scalar grade for one (sample, model): argmax of the replicate mean.

    Ties break toward the lowest class index.
    """
    arr = np.asarray(replicate_probs, dtype=float)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.size == 0:
        raise ValueError("empty replicate group")
    return float(arr.mean(axis=0).argmax())


def llfu_sigma(y, mu, var):
    """Floored log-likelihood uncertainty of one model's scalar prediction.

    For degenerate variance (var < EPS_VAR) the deviation term is 0 when the
    model agrees with the mode and SIGMA_MAX otherwise; the log term is
    already annihilated by the max(0, .) floor there.
    """
    if var < 0:
        raise ValueError("variance must be >= 0")
    if var < EPS_VAR:
        return 0.0 if y == mu else SIGMA_MAX
    log_term = 0.5 * math.log(2.0 * math.pi * var)
    return max(0.0, log_term) + (y - mu) ** 2 / (2.0 * var)


def ensemble_weights(sigmas):
    """Per-model weights proportional to 1 / max(sigma, floor), summing to 1.

    Equal uncertainties map to exactly uniform 1/k so that the uniform-weight
    degeneracies downstream hold bitwise, not just approximately.
    """
    sig = np.asarray(sigmas, dtype=float)
    if sig.ndim != 1 or sig.size == 0:
        raise ValueError("sigmas must be a non-empty 1-d sequence")
    if (sig < 0).any():
        raise ValueError("sigma must be >= 0")
    if np.all(sig == sig[0]):
        return np.full(sig.size, 1.0 / sig.size)
    inv = 1.0 / np.maximum(sig, WEIGHT_FLOOR)
    return inv / inv.sum()


def _mode(values):
    # np.unique sorts ascending, so the first max-count entry is the smallest.
    vals, counts = np.unique(values, return_counts=True)
    return float(vals[np.argmax(counts)])


def table_from_member_probs(sample_ids, member_probs):
    """Build the uncertainty table from per-(sample, model) probability rows.

    ``member_probs`` has shape (n, k, C) and already reflects whatever
    replicate aggregation the caller wants (replicate 0 only, or a TTA mean).
    """
    member_probs = np.asarray(member_probs, dtype=float)
    n, k, _ = member_probs.shape
    if k < 2:
        raise ValueError("ensemble requires >= 2 models")
    scalar = member_probs.argmax(axis=2).astype(float)

    sigma = np.zeros((n, k))
    weight = np.zeros((n, k))
    mu = np.zeros(n)
    var = np.zeros(n)
    for i in range(n):
        mu[i] = _mode(scalar[i])
        var[i] = scalar[i].var()
        for j in range(k):
            sigma[i, j] = llfu_sigma(scalar[i, j], mu[i], var[i])
        weight[i] = ensemble_weights(sigma[i])
    return UncertaintyTable(tuple(sample_ids), sigma, weight, mu, var)


def build_uncertainty_table(pset):
    """Uncertainty table for a prediction set.

    Model outputs are replicate-averaged first, so the same code path serves
    both the no-TTA case (one replicate) and the TTA case (several).
    """
    if pset.num_models < 2:
        raise ValueError("ensemble requires >= 2 models")
    dense = pset.dense()
    n, k, _, _ = dense.probs.shape
    member = np.stack(
        [[mean_simplex(dense.probs[i, j]) for j in range(k)] for i in range(n)]
    )
    return table_from_member_probs(dense.sample_ids, member)
