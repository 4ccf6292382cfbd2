"""Shared domain types for grade-probability prediction sets.

A prediction set collects per-(sample, model, replicate) class-probability
rows over C ordinal grades together with ground-truth labels.  Replicate 0 is
always the unaugmented original; replicates 1..R come from test-time
augmentation.  All types are plain immutable values, safe for concurrent
reads; anything heavier lives in the modules that consume them.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

# Max |sum - 1| a probability row may have on ingest before it is rejected.
SIMPLEX_TOL = 1e-9
# Rows already this close to sum 1 are left untouched, which makes ingest
# idempotent and keeps file round-trips bit-exact.
RENORM_SKIP = 1e-12

# PIRC grading preset: 5 ordinal severity grades 0..4.  Only a default;
# every computation is generic in the class count.
DEFAULT_NUM_CLASSES = 5

GradeLabel = int
ProbabilityVector = tuple


@dataclass(frozen=True)
class PredictionRecord:
    """One probability row: a model's output for one sample replicate."""

    sample_id: str
    model_id: int
    replicate_id: int
    probs: tuple
    label: int


@dataclass(frozen=True)
class PredictionSet:
    """Immutable collection of prediction records with C and k attached.

    Records are kept in canonical order (sample_id lexicographic, then
    model_id, then replicate_id).  Use :func:`make_prediction_set` to build a
    validated, renormalized instance; the raw constructor performs no checks
    so that invalid sets can still be inspected by
    :func:`validate_prediction_set`.
    """

    records: tuple
    num_classes: int
    num_models: int

    def sample_ids(self):
        return sorted({r.sample_id for r in self.records})

    def replicate_count(self):
        """Replicates per (sample, model) pair; uniform by invariant."""
        first = self.records[0]
        return sum(
            1
            for r in self.records
            if r.sample_id == first.sample_id and r.model_id == first.model_id
        )

    def labels_by_sample(self):
        return {r.sample_id: r.label for r in self.records}

    def dense(self):
        """Dense (n, k, t, C) view of a valid set, samples sorted by id."""
        ids = self.sample_ids()
        index = {s: i for i, s in enumerate(ids)}
        n, k, t = len(ids), self.num_models, self.replicate_count()
        probs = np.zeros((n, k, t, self.num_classes))
        labels = np.zeros(n, dtype=int)
        for r in self.records:
            i = index[r.sample_id]
            probs[i, r.model_id - 1, r.replicate_id] = r.probs
            labels[i] = r.label
        return DensePredictions(tuple(ids), probs, labels)

    def with_replicates(self, count):
        """Subset keeping only replicate ids below ``count``."""
        if count < 1:
            raise ValueError("replicate count must be >= 1")
        kept = tuple(r for r in self.records if r.replicate_id < count)
        return PredictionSet(kept, self.num_classes, self.num_models)


@dataclass(frozen=True, eq=False)
class DensePredictions:
    sample_ids: tuple
    probs: np.ndarray  # (n, k, t, C)
    labels: np.ndarray  # (n,)


def renormalize(probs):
    """Scale a near-simplex row so it sums to 1.

    Rows whose sum is already within RENORM_SKIP of 1 are returned unchanged,
    so renormalizing twice is a no-op; this is what makes serialize/parse
    round-trips reproduce sets field-by-field.
    """
    arr = np.asarray(probs, dtype=float)
    s = float(arr.sum())
    if abs(s - 1.0) <= RENORM_SKIP:
        return tuple(float(p) for p in arr)
    return tuple(float(p) for p in arr / s)


def mean_simplex(vectors):
    """Elementwise mean of probability rows, nudged back onto the simplex.

    Single-row input comes back bit-identical (the mean of one simplex row is
    itself and renormalization skips rows already on the simplex).
    """
    arr = np.asarray(vectors, dtype=float)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.size == 0:
        raise ValueError("no vectors to aggregate")
    return np.asarray(renormalize(arr.mean(axis=0)))


def _record_key(r):
    return (r.sample_id, r.model_id, r.replicate_id)


def validate_prediction_set(pset):
    """Check a set against the type invariants.

    Returns a list of violation strings; an empty list means the set is
    valid.  Violations are data, not failures: this never raises on bad
    content.
    """
    violations = []
    records = pset.records
    if not records:
        return ["no samples"]

    seen = set()
    labels = {}
    counts = {}
    for r in records:
        key = _record_key(r)
        if key in seen:
            violations.append(f"duplicate key {key}")
        seen.add(key)

        if len(r.probs) != pset.num_classes:
            violations.append(
                f"{key}: expected {pset.num_classes} probabilities, got {len(r.probs)}"
            )
            continue
        arr = np.asarray(r.probs, dtype=float)
        if (arr < 0).any() or (arr > 1).any():
            violations.append(f"{key}: probability outside [0, 1]")
        s = float(arr.sum())
        if abs(s - 1.0) > SIMPLEX_TOL:
            violations.append(f"{key}: simplex sum = {s:g}")

        if not 1 <= r.model_id <= pset.num_models:
            violations.append(f"{key}: model_id outside [1, {pset.num_models}]")
        if r.replicate_id < 0:
            violations.append(f"{key}: negative replicate_id")
        if not 0 <= r.label < pset.num_classes:
            violations.append(f"{key}: label {r.label} outside [0, {pset.num_classes - 1}]")

        if r.sample_id in labels and labels[r.sample_id] != r.label:
            violations.append(
                f"sample {r.sample_id!r}: label conflict "
                f"({labels[r.sample_id]} vs {r.label})"
            )
        labels.setdefault(r.sample_id, r.label)
        counts.setdefault((r.sample_id, r.model_id), []).append(r.replicate_id)

    reps = {tuple(sorted(v)) for v in counts.values()}
    if len(reps) > 1:
        violations.append("ragged replicates: (sample, model) pairs disagree on replicate ids")
    else:
        (only,) = reps
        if only != tuple(range(len(only))):
            violations.append("replicate ids not contiguous from 0")
    n_pairs = len({r.sample_id for r in records}) * pset.num_models
    if len(counts) != n_pairs:
        violations.append("missing (sample, model) pairs: model grid incomplete")
    return violations


def make_prediction_set(records, num_classes=None, num_models=None):
    """Validate, renormalize, and freeze records into a PredictionSet.

    C and k are inferred from the data when not given.  Raises ValueError on
    any invariant violation (use :func:`validate_prediction_set` directly to
    collect violations without raising).
    """
    records = list(records)
    if not records:
        raise ValueError("no samples")
    if num_classes is None:
        num_classes = len(records[0].probs)
    if num_models is None:
        num_models = max(r.model_id for r in records)

    raw = PredictionSet(tuple(records), num_classes, num_models)
    violations = validate_prediction_set(raw)
    if violations:
        raise ValueError("invalid prediction set: " + "; ".join(violations[:5]))

    normalized = [
        PredictionRecord(r.sample_id, r.model_id, r.replicate_id,
                         renormalize(r.probs), r.label)
        for r in records
    ]
    normalized.sort(key=_record_key)
    return PredictionSet(tuple(normalized), num_classes, num_models)
