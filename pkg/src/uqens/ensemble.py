"""Aggregation strategies over a prediction set.

Five strategies are supported, named on the CLI as single / mean / tta / ua /
uatta:

* ``single``        one member's replicate-0 output;
* ``mean_ensemble``  equal-weight mean over members (replicate 0);
* ``tta_ensemble``   equal-weight mean of per-member replicate averages;
* ``ua_ensemble``    inverse-uncertainty weighted mean of replicate-0 outputs;
* ``uatta_ens``      inverse-uncertainty weighted mean of per-member replicate
                     averages, with weights computed from those same averages.

``replicates`` counts the replicate rows consumed per (sample, model),
including the original at replicate 0; with replicates=1 the TTA strategies
collapse exactly onto their no-TTA counterparts.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import mean_simplex
from .uncertainty import table_from_member_probs

STRATEGY_KINDS = ("single", "mean_ensemble", "tta_ensemble", "ua_ensemble", "uatta_ens")
TTA_KINDS = ("tta_ensemble", "uatta_ens")

# CLI strategy names, in the order the summary table reports them.
CLI_STRATEGY_NAMES = ("single", "mean", "tta", "ua", "uatta")
CLI_TO_KIND = dict(zip(CLI_STRATEGY_NAMES, STRATEGY_KINDS))
KIND_TO_CLI = dict(zip(STRATEGY_KINDS, CLI_STRATEGY_NAMES))


@dataclass(frozen=True)
class AggregationStrategy:
    kind: str
    replicates: int = 1
    model_index: int = None

    def __post_init__(self):
        if self.kind not in STRATEGY_KINDS:
            raise ValueError(f"unknown strategy kind {self.kind!r}")
        if self.replicates < 1:
            raise ValueError("replicates must be >= 1")
        if self.replicates != 1 and self.kind not in TTA_KINDS:
            raise ValueError(f"strategy {self.kind!r} uses exactly 1 replicate")


def tta_aggregate(replicate_probs):
    """Aggregate one (sample, model)'s replicate rows: elementwise mean,
    renormalized onto the simplex.  A single replicate passes through
    bit-identical."""
    return mean_simplex(replicate_probs)


def weighted_ensemble(member_probs, weights):
    """Convex combination of per-model probability rows: sum_j w_j * p_j."""
    member_probs = np.asarray(member_probs, dtype=float)
    weights = np.asarray(weights, dtype=float)
    if member_probs.shape[0] != weights.shape[0]:
        raise ValueError("one weight per model required")
    return weights @ member_probs


def run_strategy(pset, strategy):
    """Aggregate a prediction set into per-sample forecasts.

    Returns an (n, C) array aligned with the set's sorted sample ids.
    """
    dense = pset.dense()
    n, k, t, _ = dense.probs.shape
    kind = strategy.kind

    if kind == "single":
        m = strategy.model_index if strategy.model_index is not None else 1
        if not 1 <= m <= k:
            raise ValueError(f"model_index {m} outside [1, {k}]")
        return dense.probs[:, m - 1, 0, :].copy()

    if kind in TTA_KINDS:
        r = strategy.replicates
        if r > t:
            raise ValueError(
                f"strategy {KIND_TO_CLI[kind]!r} needs {r} replicates per "
                f"(sample, model); set has {t}"
            )
        member = np.stack(
            [[tta_aggregate(dense.probs[i, j, :r]) for j in range(k)] for i in range(n)]
        )
    else:
        member = dense.probs[:, :, 0, :]

    if kind in ("mean_ensemble", "tta_ensemble"):
        weights = np.full((n, k), 1.0 / k)
    else:
        table = table_from_member_probs(dense.sample_ids, member)
        weights = table.weight

    return np.stack([weighted_ensemble(member[i], weights[i]) for i in range(n)])
