import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from uqens.core import (
    PredictionRecord,
    PredictionSet,
    make_prediction_set,
    mean_simplex,
    renormalize,
    validate_prediction_set,
)
from helpers import random_prediction_set, random_simplex


def test_validate_accepts_clean_set():
    rng = np.random.default_rng(0)
    pset = random_prediction_set(rng)
    assert validate_prediction_set(pset) == []


def test_validate_flags_simplex_violation():
    rec = PredictionRecord("a", 1, 0, (0.5, 0.5, 0.5, 0.0, 0.0), 0)
    violations = validate_prediction_set(PredictionSet((rec,), 5, 1))
    assert any("simplex sum = 1.5" in v for v in violations)


def test_validate_flags_label_conflict():
    records = (
        PredictionRecord("a", 1, 0, (1.0, 0.0), 0),
        PredictionRecord("a", 2, 0, (1.0, 0.0), 1),
    )
    violations = validate_prediction_set(PredictionSet(records, 2, 2))
    assert any("label conflict" in v for v in violations)


def test_validate_flags_ragged_replicates():
    records = (
        PredictionRecord("a", 1, 0, (1.0, 0.0), 0),
        PredictionRecord("a", 1, 1, (1.0, 0.0), 0),
        PredictionRecord("b", 1, 0, (1.0, 0.0), 1),
    )
    violations = validate_prediction_set(PredictionSet(records, 2, 1))
    assert any("ragged" in v for v in violations)


def test_validate_flags_duplicate_key():
    records = (
        PredictionRecord("a", 1, 0, (1.0, 0.0), 0),
        PredictionRecord("a", 1, 0, (0.0, 1.0), 0),
    )
    violations = validate_prediction_set(PredictionSet(records, 2, 1))
    assert any("duplicate" in v for v in violations)


def test_make_prediction_set_rejects_violations():
    rec = PredictionRecord("a", 1, 0, (0.5, 0.5, 0.5, 0.0, 0.0), 0)
    with pytest.raises(ValueError, match="simplex"):
        make_prediction_set([rec])


def test_make_prediction_set_infers_shape():
    rng = np.random.default_rng(1)
    records = [
        PredictionRecord(f"s{i}", j, 0, random_simplex(rng, 3), 1)
        for i in range(4)
        for j in (1, 2)
    ]
    pset = make_prediction_set(records)
    assert pset.num_classes == 3
    assert pset.num_models == 2
    assert pset.replicate_count() == 1


def test_renormalize_within_tolerance():
    # off by a CSV-size rounding error: renormalized back onto the simplex
    probs = (0.5 + 4e-10, 0.25, 0.25)
    out = renormalize(probs)
    assert abs(sum(out) - 1.0) < 1e-15


def test_renormalize_idempotent():
    rng = np.random.default_rng(2)
    for _ in range(100):
        probs = rng.dirichlet(np.ones(5)) * (1 + rng.uniform(-1e-9, 1e-9))
        once = renormalize(probs)
        assert renormalize(once) == once


def test_mean_simplex_single_row_identity():
    rng = np.random.default_rng(3)
    row = np.asarray(random_simplex(rng, 5))
    assert np.array_equal(mean_simplex(row[None, :]), row)


def test_dense_round_trip():
    rng = np.random.default_rng(4)
    pset = random_prediction_set(rng, n_samples=5, n_models=3, n_replicates=2,
                                 num_classes=4)
    dense = pset.dense()
    assert dense.probs.shape == (5, 3, 2, 4)
    by_key = {(r.sample_id, r.model_id, r.replicate_id): r for r in pset.records}
    for i, sid in enumerate(dense.sample_ids):
        for j in range(3):
            for r in range(2):
                rec = by_key[(sid, j + 1, r)]
                assert np.array_equal(dense.probs[i, j, r], np.asarray(rec.probs))
                assert dense.labels[i] == rec.label


def test_with_replicates_subsets():
    rng = np.random.default_rng(5)
    pset = random_prediction_set(rng, n_samples=4, n_models=2, n_replicates=3,
                                 num_classes=3)
    sub = pset.with_replicates(1)
    assert sub.replicate_count() == 1
    assert all(r.replicate_id == 0 for r in sub.records)


@settings(max_examples=100, deadline=None, derandomize=True)
@given(st.integers(0, 2**32 - 1))
def test_validate_accepts_exactly_valid_sets(seed):
    rng = np.random.default_rng(seed)
    pset = random_prediction_set(rng)
    assert validate_prediction_set(pset) == []
    # breaking one record's simplex is always caught
    records = list(pset.records)
    bad = records[0]
    records[0] = PredictionRecord(
        bad.sample_id, bad.model_id, bad.replicate_id,
        tuple(p + 0.5 for p in bad.probs), bad.label,
    )
    broken = PredictionSet(tuple(records), pset.num_classes, pset.num_models)
    assert any("simplex" in v for v in validate_prediction_set(broken))
