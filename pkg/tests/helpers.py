"""Shared builders for randomized test instances."""

import numpy as np

from uqens.core import PredictionRecord, make_prediction_set


def random_simplex(rng, num_classes):
    return tuple(rng.dirichlet(np.ones(num_classes)))


def random_prediction_set(rng, n_samples=None, n_models=None, n_replicates=None,
                          num_classes=None, agree=False):
    """A valid random PredictionSet; with agree=True all models share each
    sample's argmax so every per-sample uncertainty is zero."""
    n_samples = n_samples or int(rng.integers(2, 12))
    n_models = n_models or int(rng.integers(2, 5))
    n_replicates = n_replicates or int(rng.integers(1, 4))
    num_classes = num_classes or int(rng.integers(2, 8))

    records = []
    for i in range(n_samples):
        label = int(rng.integers(num_classes))
        winner = int(rng.integers(num_classes)) if agree else None
        for j in range(1, n_models + 1):
            for r in range(n_replicates):
                probs = np.asarray(random_simplex(rng, num_classes))
                if agree:
                    top = probs.max()
                    # move the peak to the agreed class
                    k = probs.argmax()
                    probs[k], probs[winner] = probs[winner], top
                records.append(
                    PredictionRecord(f"s{i:04d}", j, r, tuple(probs), label)
                )
    return make_prediction_set(records, num_models=n_models)
