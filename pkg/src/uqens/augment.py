"""Seeded, replayable test-time augmentation over raster images, plus the
black-background-removal and resize/normalize preprocessing steps.

Every augmentation replicate is described by an AugmentationPlan whose
parameters are drawn from a counter-based generator keyed by hashing
(seed, sample_id, replicate_id); plans are therefore independent of draw
order and reproduce bit-identical images on replay from stored keys.

Transforms apply in a fixed order: brightness (additive), contrast
(multiplicative about 0.5), saturation scale and hue rotation in HLS space,
random crop, bilinear resize back to the original dims, horizontal flip,
vertical flip.  Channels are clamped to [0, 1] after every step.  Replicate 0
is always the identity.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .image import RasterImage, bilinear_resize, hls_to_rgb, rgb_to_hls

BRIGHTNESS_RANGE = (-0.15, 0.15)
SATURATION_RANGE = (0.5, 2.5)
HUE_RANGE = (-0.15, 0.15)
CONTRAST_RANGE = (0.5, 1.5)
# Crop side length as a fraction of each image dimension.
CROP_SCALE_RANGE = (0.7, 1.0)
# Near-zero-but-not-zero backgrounds survive 8-bit codecs; 10/255 catches them.
DEFAULT_BLACK_THRESHOLD = 10.0 / 255.0


@dataclass(frozen=True)
class AugmentationPlan:
    """Replayable parameters of one augmentation replicate."""

    seed: int
    sample_id: str
    replicate_id: int
    brightness: float
    saturation: float
    hue: float
    contrast: float
    crop: tuple  # (x, y, w, h) in pixels
    hflip: bool
    vflip: bool


def plan_rng(seed, sample_id, replicate_id):
    """Counter-based generator keyed by hashing (seed, sample_id, replicate_id)."""
    digest = hashlib.blake2b(
        f"{seed}|{sample_id}|{replicate_id}".encode(), digest_size=16
    ).digest()
    return np.random.Generator(np.random.Philox(key=int.from_bytes(digest, "little")))


def _open_uniform(rng, low, high):
    # Redraw endpoint hits so every parameter sits strictly inside its range.
    x = low + (high - low) * rng.random()
    while not low < x < high:
        x = low + (high - low) * rng.random()
    return x


def identity_plan(seed, sample_id, width, height):
    return AugmentationPlan(
        seed=seed,
        sample_id=sample_id,
        replicate_id=0,
        brightness=0.0,
        saturation=1.0,
        hue=0.0,
        contrast=1.0,
        crop=(0, 0, width, height),
        hflip=False,
        vflip=False,
    )


def sample_plan(seed, sample_id, replicate_id, width, height):
    """Draw one replicate's plan.  Replicate 0 is the identity by contract."""
    if replicate_id < 0:
        raise ValueError("replicate_id must be >= 0")
    if width < 1 or height < 1:
        raise ValueError("image dims must be >= 1")
    if replicate_id == 0:
        return identity_plan(seed, sample_id, width, height)

    rng = plan_rng(seed, sample_id, replicate_id)
    brightness = _open_uniform(rng, *BRIGHTNESS_RANGE)
    saturation = _open_uniform(rng, *SATURATION_RANGE)
    hue = _open_uniform(rng, *HUE_RANGE)
    contrast = _open_uniform(rng, *CONTRAST_RANGE)

    lo, hi = CROP_SCALE_RANGE
    crop_w = max(1, int(round((lo + (hi - lo) * rng.random()) * width)))
    crop_h = max(1, int(round((lo + (hi - lo) * rng.random()) * height)))
    crop_x = int(rng.integers(0, width - crop_w + 1))
    crop_y = int(rng.integers(0, height - crop_h + 1))
    hflip = bool(rng.random() < 0.5)
    vflip = bool(rng.random() < 0.5)
    return AugmentationPlan(
        seed=seed,
        sample_id=sample_id,
        replicate_id=replicate_id,
        brightness=brightness,
        saturation=saturation,
        hue=hue,
        contrast=contrast,
        crop=(crop_x, crop_y, crop_w, crop_h),
        hflip=hflip,
        vflip=vflip,
    )


def apply_plan(img, plan):
    """Apply a plan; output dims equal input dims, channels in [0, 1].

    Identity-valued parameters are skipped outright so the identity plan is
    pixel-exact (0.5 + (x - 0.5) is not x in floats).
    """
    height, width = img.height, img.width
    x, y, w, h = plan.crop
    if x < 0 or y < 0 or w < 1 or h < 1 or x + w > width or y + h > height:
        raise ValueError(f"crop {plan.crop} outside image bounds {width}x{height}")

    px = img.pixels
    if plan.brightness != 0.0:
        px = np.clip(px + plan.brightness, 0.0, 1.0)
    if plan.contrast != 1.0:
        px = np.clip(0.5 + plan.contrast * (px - 0.5), 0.0, 1.0)
    if plan.saturation != 1.0 or plan.hue != 0.0:
        hue_ch, light_ch, sat_ch = rgb_to_hls(px)
        if plan.saturation != 1.0:
            sat_ch = np.clip(sat_ch * plan.saturation, 0.0, 1.0)
        if plan.hue != 0.0:
            hue_ch = (hue_ch + plan.hue) % 1.0
        px = np.clip(hls_to_rgb(hue_ch, light_ch, sat_ch), 0.0, 1.0)
    if (x, y, w, h) != (0, 0, width, height):
        px = np.clip(bilinear_resize(px[y : y + h, x : x + w], height, width), 0.0, 1.0)
    if plan.hflip:
        px = px[:, ::-1]
    if plan.vflip:
        px = px[::-1]
    return RasterImage(px)


def remove_black_background(img, threshold=DEFAULT_BLACK_THRESHOLD):
    """Crop to the tight bounding box of pixels brighter than the threshold.

    An image with no pixel above the threshold comes back unchanged.
    """
    if not 0.0 <= threshold < 1.0:
        raise ValueError("threshold must be in [0, 1)")
    bright = img.pixels.max(axis=2) > threshold
    if not bright.any():
        return img
    rows = np.flatnonzero(bright.any(axis=1))
    cols = np.flatnonzero(bright.any(axis=0))
    return RasterImage(img.pixels[rows[0] : rows[-1] + 1, cols[0] : cols[-1] + 1])


def resize_normalize(img, side):
    """Bilinear resize to side x side, then per-channel standardization.

    Channels are normalized to zero mean / unit variance across the image and
    affinely mapped back into storage range: mean -> 0.5, +-2 sigma -> [0, 1],
    clamped.  Constant channels map to 0.5 everywhere.
    """
    if side < 1:
        raise ValueError("side must be >= 1")
    px = bilinear_resize(img.pixels, side, side)
    out = np.empty_like(px)
    for c in range(3):
        channel = px[..., c]
        sd = channel.std()
        if sd < 1e-12:
            out[..., c] = 0.5
        else:
            out[..., c] = 0.5 + (channel - channel.mean()) / (4.0 * sd)
    return RasterImage(np.clip(out, 0.0, 1.0))


def preprocess(img, side, black_threshold=DEFAULT_BLACK_THRESHOLD):
    """Standard input pipeline: background removal, then resize/normalize."""
    return resize_normalize(remove_black_background(img, black_threshold), side)
