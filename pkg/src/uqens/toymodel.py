"""Synthetic ordinal-grade image data and a small linear-softmax classifier.

The generator draws grade labels from (typically imbalanced) class priors and
renders each sample as a tissue-colored field carrying a fixed total number
of bright lesion blobs.  The grade is encoded by how strongly the lesions
concentrate in the central zone: the number of central blobs grows
monotonically with the grade while the periphery absorbs the remainder.
Because the total lesion mass is constant and density is a scale-free
statistic read at a crop-stable location, the signal survives flips,
moderate crops, rescaling, and per-image normalization, the way
augmentation-friendly fundus images behave.  Blobs live in disjoint grid
cells at jittered phases, so at difficulty 0 the central bright-pixel count
alone determines the grade exactly.  ``difficulty`` blurs the grade itself
(the central count is jittered across grade boundaries) and adds pixel
noise, capping how separable the task can be.

The classifier is a single linear map from flattened pixels to C logits with
a softmax output, trained by mini-batch SGD on weighted cross-entropy.
Members trained from different seeds (init + batch order) form the ensemble.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .augment import apply_plan, preprocess, sample_plan
from .core import PredictionRecord, make_prediction_set
from .image import RasterImage, read_image, write_image

DEFAULT_PRIORS = (0.5, 0.2, 0.15, 0.1, 0.05)
DEFAULT_IMAGE_SIDE = 32

_TISSUE_COLOR = np.array([0.45, 0.30, 0.22])
_LESION_COLOR = np.array([0.95, 0.85, 0.55])
# Lesion pixels exceed this on their max channel; tissue does not.
_LESION_THRESHOLD = 0.75
# Each lesion is a blob at a random phase inside its grid cell; the phase
# jitter keeps classifiers from locking onto exact pixel positions, and the
# blob-in-cell layout keeps blobs disjoint so bright area stays exact.
_CELL_SIDE = 4
_BLOB_SIDE = 3
# The central patch is the middle half of the cell grid in each axis; the
# grade sets the share of its cells that carry lesions.
_CENTER_FRAC_MIN = 0.125
_CENTER_FRAC_MAX = 0.875
# Fraction of all grid cells carrying a lesion, identical for every grade so
# per-image normalization cannot leak the grade through global statistics.
_TOTAL_LESION_FRAC = 0.375
# Difficulty 1 jitters the central count by this many cells (std dev).
_COUNT_JITTER_SCALE = 3.0
_NOISE_SCALE = 0.3

_MODEL_MAGIC = b"UQTM"
_MODEL_HEADER = struct.Struct("<4sIIIIqI")


@dataclass(frozen=True, eq=False)
class SyntheticDataset:
    images: tuple
    labels: np.ndarray
    class_priors: tuple

    def __len__(self):
        return len(self.images)


@dataclass(frozen=True, eq=False)
class ToyClassifier:
    """Linear map (flattened pixels + bias -> C logits) with softmax output."""

    params: np.ndarray  # (D + 1) * C floats: W row-major, then biases
    width: int
    height: int
    num_classes: int
    seed: int
    epochs_trained: int
    loss_history: tuple = ()

    @property
    def feature_dim(self):
        return self.width * self.height * 3


def sample_id_for(index):
    return f"s{index:05d}"


def _grid_cells(side):
    """(central cells, peripheral cells) as lists of top-left corners."""
    corners = np.arange(0, side - _CELL_SIDE + 1, _CELL_SIDE)
    lo = len(corners) // 4
    hi = len(corners) - lo
    center, periphery = [], []
    for i, y in enumerate(corners):
        for j, x in enumerate(corners):
            if lo <= i < hi and lo <= j < hi:
                center.append((y, x))
            else:
                periphery.append((y, x))
    return center, periphery


def center_patch_bounds(side):
    """Pixel bounds (lo, hi) of the central cell patch, half-open."""
    corners = np.arange(0, side - _CELL_SIDE + 1, _CELL_SIDE)
    lo = len(corners) // 4
    hi = len(corners) - lo
    return int(corners[lo]), int(corners[hi - 1] + _CELL_SIDE)


def lesion_counts(num_classes, side):
    """(total lesions, central lesions per grade) at a given image side."""
    center, periphery = _grid_cells(side)
    n_cells = len(center) + len(periphery)
    total = int(round(_TOTAL_LESION_FRAC * n_cells))
    fractions = np.linspace(_CENTER_FRAC_MIN, _CENTER_FRAC_MAX, num_classes)
    central = np.round(fractions * len(center)).astype(int)
    if central.max() > min(len(center), total):
        raise ValueError(f"side {side} too small for the lesion layout")
    if (total - central.min()) > len(periphery):
        raise ValueError(f"side {side} too small for the lesion layout")
    return total, central


def generate_dataset(seed, n, class_priors=DEFAULT_PRIORS, difficulty=0.5,
                     side=DEFAULT_IMAGE_SIDE):
    """Deterministically generate n labeled grade images."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if not 0.0 <= difficulty <= 1.0:
        raise ValueError("difficulty must be in [0, 1]")
    priors = np.asarray(class_priors, dtype=float)
    num_classes = priors.size
    if num_classes < 2 or (priors <= 0).any() or abs(priors.sum() - 1.0) > 1e-9:
        raise ValueError("class_priors must be positive and sum to 1")
    if side < 16:
        raise ValueError("side must be >= 16")

    center, periphery = _grid_cells(side)
    total, central_per_grade = lesion_counts(num_classes, side)
    slack = _CELL_SIDE - _BLOB_SIDE
    rng = np.random.default_rng(seed)
    labels = rng.choice(num_classes, size=n, p=priors)
    images = []
    for label in labels:
        n_central = central_per_grade[label]
        if difficulty > 0.0:
            n_central += int(round(rng.normal(0.0, _COUNT_JITTER_SCALE * difficulty)))
            n_central = int(np.clip(n_central, max(0, total - len(periphery)),
                                    min(len(center), total)))
        canvas = np.tile(_TISSUE_COLOR, (side, side, 1))
        spots = [center[i] for i in rng.choice(len(center), size=n_central,
                                               replace=False)]
        spots += [periphery[i] for i in rng.choice(len(periphery),
                                                   size=total - n_central,
                                                   replace=False)]
        for y0, x0 in spots:
            y = y0 + int(rng.integers(0, slack + 1))
            x = x0 + int(rng.integers(0, slack + 1))
            canvas[y : y + _BLOB_SIDE, x : x + _BLOB_SIDE] = _LESION_COLOR
        if difficulty > 0.0:
            canvas = canvas + rng.normal(0.0, _NOISE_SCALE * difficulty, canvas.shape)
        images.append(RasterImage(np.clip(canvas, 0.0, 1.0)))
    return SyntheticDataset(tuple(images), labels, tuple(float(p) for p in priors))


def bright_pixel_count(img, threshold=_LESION_THRESHOLD, central_only=True):
    """Bright pixels in the central patch (or the whole frame).

    At difficulty 0 the central count is exactly the central-blob area drawn
    for the sample's grade.
    """
    bright = img.pixels.max(axis=2) > threshold
    if central_only:
        lo, hi = center_patch_bounds(img.width)
        bright = bright[lo:hi, lo:hi]
    return int(bright.sum())


def grade_by_count(img, num_classes, side=None):
    """Classify by nearest expected central bright area; exact on
    difficulty-0 data."""
    side = side if side is not None else img.width
    _, central_per_grade = lesion_counts(num_classes, side)
    expected = central_per_grade * _BLOB_SIDE**2
    return int(np.argmin(np.abs(expected - bright_pixel_count(img))))


def subset_dataset(dataset, indices):
    indices = list(indices)
    return SyntheticDataset(
        tuple(dataset.images[i] for i in indices),
        dataset.labels[indices],
        dataset.class_priors,
    )


def preprocess_dataset(dataset, side):
    """Apply the standard input pipeline to every image."""
    return SyntheticDataset(
        tuple(preprocess(img, side) for img in dataset.images),
        dataset.labels.copy(),
        dataset.class_priors,
    )


def inverse_prior_weights(priors):
    """Default class weights: w_c = 1 / (C * prior_c)."""
    priors = np.asarray(priors, dtype=float)
    if priors.size == 0 or (priors <= 0).any():
        raise ValueError("priors must be positive")
    return 1.0 / (priors.size * priors)


def _unpack(params, feature_dim, num_classes):
    w = params[: feature_dim * num_classes].reshape(num_classes, feature_dim)
    b = params[feature_dim * num_classes :]
    return w, b


def _log_softmax(logits):
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def loss_and_grad(params, features, labels, class_weights, num_classes):
    """Weighted cross-entropy of softmax-of-linear logits, with its gradient.

    Loss = sum_i w[y_i] * (-log p_i[y_i]) / sum_i w[y_i], so equal weights of
    any value reduce to the unweighted mean cross-entropy.
    """
    n, feature_dim = features.shape
    w, b = _unpack(params, feature_dim, num_classes)
    logits = features @ w.T + b
    logp = _log_softmax(logits)
    sample_w = np.asarray(class_weights, dtype=float)[labels]
    total_w = sample_w.sum()
    loss = float(-(sample_w * logp[np.arange(n), labels]).sum() / total_w)

    dlogits = np.exp(logp)
    dlogits[np.arange(n), labels] -= 1.0
    dlogits *= (sample_w / total_w)[:, None]
    grad_w = dlogits.T @ features
    grad_b = dlogits.sum(axis=0)
    return loss, np.concatenate([grad_w.ravel(), grad_b])


def train(dataset, seed, epochs, lr, class_weights=None, batch_size=32):
    """Mini-batch SGD on weighted cross-entropy; deterministic given seed."""
    if epochs < 1:
        raise ValueError("epochs must be >= 1")
    if lr <= 0:
        raise ValueError("lr must be > 0")
    num_classes = len(dataset.class_priors)
    if class_weights is None:
        class_weights = inverse_prior_weights(dataset.class_priors)
    class_weights = np.asarray(class_weights, dtype=float)
    if class_weights.shape != (num_classes,) or (class_weights <= 0).any():
        raise ValueError("class_weights must be positive, one per class")

    first = dataset.images[0]
    features = np.stack([img.pixels.ravel() for img in dataset.images])
    labels = dataset.labels
    n, feature_dim = features.shape

    rng = np.random.default_rng(seed)
    params = np.concatenate(
        [rng.normal(0.0, 0.01, feature_dim * num_classes), np.zeros(num_classes)]
    )
    history = []
    for _ in range(epochs):
        order = rng.permutation(n)
        for start in range(0, n, batch_size):
            batch = order[start : start + batch_size]
            _, grad = loss_and_grad(
                params, features[batch], labels[batch], class_weights, num_classes
            )
            params = params - lr * grad
        epoch_loss, _ = loss_and_grad(params, features, labels, class_weights, num_classes)
        history.append(epoch_loss)
    return ToyClassifier(
        params=params,
        width=first.width,
        height=first.height,
        num_classes=num_classes,
        seed=seed,
        epochs_trained=epochs,
        loss_history=tuple(history),
    )


def predict_batch(model, features):
    w, b = _unpack(model.params, model.feature_dim, model.num_classes)
    logits = features @ w.T + b
    shifted = np.exp(logits - logits.max(axis=1, keepdims=True))
    return shifted / shifted.sum(axis=1, keepdims=True)


def predict(model, img):
    """Softmax class probabilities for one image."""
    if img.width != model.width or img.height != model.height:
        raise ValueError(
            f"image dims {img.width}x{img.height} do not match "
            f"model dims {model.width}x{model.height}"
        )
    return predict_batch(model, img.pixels.ravel()[None, :])[0]


def build_ensemble_predictions(models, dataset, tta=None):
    """Predict every (sample, model, replicate) and assemble a PredictionSet.

    Replicate 0 is the prediction on the preprocessed original; with
    ``tta=(seed, R)``, replicates 1..R augment the raw image first and then
    run it through the same preprocessing, the way augmented inputs reach the
    trained members in the full pipeline.
    """
    models = list(models)
    if not models:
        raise ValueError("at least one model required")
    side = models[0].width
    if any(m.width != side or m.height != side or
           m.num_classes != models[0].num_classes for m in models):
        raise ValueError("ensemble members must share input dims and class count")

    ids = [sample_id_for(i) for i in range(len(dataset.images))]
    labels = dataset.labels

    batches = [
        np.stack([preprocess(img, side).pixels.ravel() for img in dataset.images])
    ]
    if tta is not None:
        tta_seed, reps = tta
        for r in range(1, reps + 1):
            batches.append(
                np.stack(
                    [
                        preprocess(
                            apply_plan(
                                img,
                                sample_plan(tta_seed, ids[i], r, img.width, img.height),
                            ),
                            side,
                        ).pixels.ravel()
                        for i, img in enumerate(dataset.images)
                    ]
                )
            )

    records = []
    for j, model in enumerate(models, start=1):
        for r, feats in enumerate(batches):
            probs = predict_batch(model, feats)
            records.extend(
                PredictionRecord(ids[i], j, r, tuple(probs[i]), int(labels[i]))
                for i in range(len(ids))
            )
    return make_prediction_set(records, num_models=len(models))


def save_model(model, path):
    """Flat binary: magic, version, dims, C, seed, epochs, then parameters."""
    header = _MODEL_HEADER.pack(
        _MODEL_MAGIC, 1, model.width, model.height, model.num_classes,
        model.seed, model.epochs_trained,
    )
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.asarray(model.params, dtype="<f8").tobytes())


def load_model(path):
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) < _MODEL_HEADER.size:
        raise ValueError(f"{path}: truncated model file")
    magic, version, width, height, num_classes, seed, epochs = _MODEL_HEADER.unpack(
        raw[: _MODEL_HEADER.size]
    )
    if magic != _MODEL_MAGIC or version != 1:
        raise ValueError(f"{path}: not a model file")
    params = np.frombuffer(raw[_MODEL_HEADER.size :], dtype="<f8").copy()
    expected = (width * height * 3 + 1) * num_classes
    if params.size != expected:
        raise ValueError(f"{path}: expected {expected} parameters, found {params.size}")
    return ToyClassifier(
        params=params, width=width, height=height, num_classes=num_classes,
        seed=seed, epochs_trained=epochs,
    )


def save_dataset(dataset, directory, image_format="png"):
    """Persist as a directory of images plus a labels CSV."""
    directory = Path(directory)
    (directory / "images").mkdir(parents=True, exist_ok=True)
    lines = ["sample_id,label"]
    for i, (img, label) in enumerate(zip(dataset.images, dataset.labels)):
        sid = sample_id_for(i)
        write_image(img, directory / "images" / f"{sid}.{image_format}")
        lines.append(f"{sid},{int(label)}")
    (directory / "labels.csv").write_text("\n".join(lines) + "\n")


def load_dataset(directory, num_classes=None):
    """Reload a persisted dataset; priors are re-estimated from the labels."""
    directory = Path(directory)
    labels_path = directory / "labels.csv"
    if not labels_path.exists():
        raise ValueError(f"{labels_path}: no labels file")
    rows = labels_path.read_text().strip().splitlines()
    if rows[:1] != ["sample_id,label"] or len(rows) < 2:
        raise ValueError(f"{labels_path}: malformed labels file")
    ids, labels = [], []
    for line in rows[1:]:
        sid, label = line.split(",")
        ids.append(sid)
        labels.append(int(label))
    images = []
    for sid in ids:
        for ext in ("png", "ppm"):
            candidate = directory / "images" / f"{sid}.{ext}"
            if candidate.exists():
                images.append(read_image(candidate))
                break
        else:
            raise ValueError(f"missing image for sample {sid!r}")
    labels = np.asarray(labels, dtype=int)
    if num_classes is None:
        num_classes = int(labels.max()) + 1
    counts = np.bincount(labels, minlength=num_classes)
    priors = tuple(counts / counts.sum())
    return SyntheticDataset(tuple(images), labels, priors)
