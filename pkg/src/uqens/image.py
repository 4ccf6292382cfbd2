"""RGB raster images as float arrays in [0, 1], plus the color-space and
resampling primitives the augmentation transforms are built on.

Pixel layout is (height, width, 3) float64, row-major.  File I/O quantizes to
8-bit PNG or binary PPM (P6).
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

ONE_SIXTH = 1.0 / 6.0
ONE_THIRD = 1.0 / 3.0
TWO_THIRD = 2.0 / 3.0


@dataclass(frozen=True, eq=False)
class RasterImage:
    """Immutable RGB image; channel values live in [0, 1]."""

    pixels: np.ndarray

    def __post_init__(self):
        arr = np.ascontiguousarray(np.asarray(self.pixels, dtype=float))
        if arr.ndim != 3 or arr.shape[2] != 3 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError("pixels must have shape (height, width, 3)")
        object.__setattr__(self, "pixels", arr)

    @property
    def height(self):
        return self.pixels.shape[0]

    @property
    def width(self):
        return self.pixels.shape[1]


def rgb_to_hls(pixels):
    """Vectorized RGB -> (hue, lightness, saturation), all in [0, 1].

    Achromatic pixels get hue 0 and saturation 0.
    """
    r, g, b = pixels[..., 0], pixels[..., 1], pixels[..., 2]
    maxc = pixels.max(axis=-1)
    minc = pixels.min(axis=-1)
    sumc = maxc + minc
    rangec = maxc - minc
    light = sumc / 2.0

    gray = rangec == 0
    safe_range = np.where(gray, 1.0, rangec)
    sat_lo = rangec / np.where(sumc == 0, 1.0, sumc)
    sat_hi = rangec / np.where(2.0 - sumc == 0, 1.0, 2.0 - sumc)
    sat = np.where(gray, 0.0, np.where(light <= 0.5, sat_lo, sat_hi))

    rc = (maxc - r) / safe_range
    gc = (maxc - g) / safe_range
    bc = (maxc - b) / safe_range
    hue = np.where(r == maxc, bc - gc, np.where(g == maxc, 2.0 + rc - bc, 4.0 + gc - rc))
    hue = np.where(gray, 0.0, (hue / 6.0) % 1.0)
    return hue, light, sat


def _hls_component(m1, m2, hue):
    hue = hue % 1.0
    return np.where(
        hue < ONE_SIXTH,
        m1 + (m2 - m1) * hue * 6.0,
        np.where(
            hue < 0.5,
            m2,
            np.where(hue < TWO_THIRD, m1 + (m2 - m1) * (TWO_THIRD - hue) * 6.0, m1),
        ),
    )


def hls_to_rgb(hue, light, sat):
    """Vectorized (hue, lightness, saturation) -> RGB array in [0, 1]."""
    m2 = np.where(light <= 0.5, light * (1.0 + sat), light + sat - light * sat)
    m1 = 2.0 * light - m2
    rgb = np.stack(
        [
            _hls_component(m1, m2, hue + ONE_THIRD),
            _hls_component(m1, m2, hue),
            _hls_component(m1, m2, hue - ONE_THIRD),
        ],
        axis=-1,
    )
    gray = sat == 0
    if gray.any():
        rgb = np.where(gray[..., None], light[..., None], rgb)
    return rgb


def bilinear_resize(pixels, out_height, out_width):
    """Bilinear resample with pixel-center alignment and edge clamping.

    Resizing to the input dims reproduces the input exactly; shrinking a 2x2
    image to 1x1 yields the mean of the four pixels.
    """
    if out_height < 1 or out_width < 1:
        raise ValueError("output dims must be >= 1")
    in_h, in_w = pixels.shape[:2]
    ys = np.clip((np.arange(out_height) + 0.5) * (in_h / out_height) - 0.5, 0, in_h - 1)
    xs = np.clip((np.arange(out_width) + 0.5) * (in_w / out_width) - 0.5, 0, in_w - 1)
    y0 = np.floor(ys).astype(int)
    x0 = np.floor(xs).astype(int)
    y1 = np.minimum(y0 + 1, in_h - 1)
    x1 = np.minimum(x0 + 1, in_w - 1)
    fy = (ys - y0)[:, None, None]
    fx = (xs - x0)[None, :, None]

    top = pixels[y0[:, None], x0[None, :]] * (1.0 - fx) + pixels[y0[:, None], x1[None, :]] * fx
    bottom = pixels[y1[:, None], x0[None, :]] * (1.0 - fx) + pixels[y1[:, None], x1[None, :]] * fx
    return top * (1.0 - fy) + bottom * fy


def quantize(img):
    """8-bit view of an image, as written to disk."""
    return np.clip(np.rint(img.pixels * 255.0), 0, 255).astype(np.uint8)


def write_image(img, path):
    """Write as 8-bit RGB; format chosen by suffix (.png or .ppm)."""
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix not in (".png", ".ppm"):
        raise ValueError(f"unsupported image format {suffix!r} (use .png or .ppm)")
    Image.fromarray(quantize(img), "RGB").save(path, format="PNG" if suffix == ".png" else "PPM")


def read_image(path):
    path = Path(path)
    if not path.exists():
        raise ValueError(f"unreadable image {path}")
    with Image.open(path) as im:
        arr = np.asarray(im.convert("RGB"), dtype=float) / 255.0
    return RasterImage(arr)
