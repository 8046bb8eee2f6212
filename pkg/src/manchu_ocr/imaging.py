"""Word-image preprocessing.

Rasters are 2-D ``uint8`` numpy arrays indexed ``[row, col]`` (height first).
Every operation returns a new array and leaves its input untouched.
"""
from __future__ import annotations

import io
from dataclasses import asdict, dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np
from PIL import Image
from scipy import ndimage

from .errors import BadWindow, ConfigError
from .records import atomic_write_bytes


@dataclass(frozen=True)
class PreprocessConfig:
    target_width: int = 64
    target_height: int = 480
    median_window: int = 3
    contrast_low_pct: float = 1.0
    contrast_high_pct: float = 99.0
    invert: bool = True

    def __post_init__(self):
        if not 0 <= self.contrast_low_pct < self.contrast_high_pct <= 100:
            raise ConfigError("need 0 <= contrastLowPct < contrastHighPct <= 100")
        if self.median_window < 1 or self.median_window % 2 == 0:
            raise ConfigError("medianWindow must be odd and >= 1")
        if self.target_width < 8 or self.target_height < 8:
            raise ConfigError("target dimensions must be >= 8")

    @classmethod
    def from_dict(cls, d: dict | None) -> "PreprocessConfig":
        d = d or {}
        keys = {
            "targetWidth": "target_width",
            "targetHeight": "target_height",
            "medianWindow": "median_window",
            "contrastLowPct": "contrast_low_pct",
            "contrastHighPct": "contrast_high_pct",
            "invert": "invert",
        }
        unknown = set(d) - set(keys)
        if unknown:
            raise ConfigError(f"unknown preprocess keys: {sorted(unknown)}")
        return cls(**{keys[k]: v for k, v in d.items()})

    def to_dict(self) -> dict:
        d = asdict(self)
        return {
            "targetWidth": d["target_width"],
            "targetHeight": d["target_height"],
            "medianWindow": d["median_window"],
            "contrastLowPct": d["contrast_low_pct"],
            "contrastHighPct": d["contrast_high_pct"],
            "invert": d["invert"],
        }


def as_raster(img) -> np.ndarray:
    arr = np.asarray(img)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"expected a non-empty 2-D raster, got shape {arr.shape}")
    if arr.dtype != np.uint8:
        if arr.min() < 0 or arr.max() > 255:
            raise ValueError("pixel values outside 0..255")
        arr = arr.astype(np.uint8)
    return arr


def _round_u8(values: np.ndarray) -> np.ndarray:
    # round half up, then clamp
    return np.clip(np.floor(values + 0.5), 0, 255).astype(np.uint8)


def invert(img) -> np.ndarray:
    return 255 - as_raster(img)


def median_denoise(img, window: int = 3) -> np.ndarray:
    img = as_raster(img)
    if window < 1 or window % 2 == 0:
        raise BadWindow(f"window must be odd and >= 1, got {window}")
    if window > min(img.shape):
        raise BadWindow(f"window {window} exceeds image size {img.shape[1]}x{img.shape[0]}")
    if window == 1:
        return img.copy()
    return ndimage.median_filter(img, size=window, mode="nearest")


def contrast_stretch(img, low_pct: float = 1.0, high_pct: float = 99.0) -> np.ndarray:
    """Linear map of the low/high percentile levels onto 0/255, clamped.

    Percentiles are order statistics (lower for the low end, higher for the
    high end), so a stretched image stretches to itself.
    """
    img = as_raster(img)
    lo = int(np.percentile(img, low_pct, method="lower"))
    hi = int(np.percentile(img, high_pct, method="higher"))
    if hi <= lo:
        return img.copy()
    return _round_u8((img.astype(np.float64) - lo) * (255.0 / (hi - lo)))


def otsu_threshold(img) -> int:
    """Threshold t maximizing between-class variance of {<= t} vs {> t}.

    Exact rational arithmetic; the lowest maximizing t wins ties.
    """
    hist = np.bincount(as_raster(img).ravel(), minlength=256)
    total_n = int(hist.sum())
    total_s = int((hist * np.arange(256)).sum())
    best_t, best = 0, Fraction(-1)
    n0 = s0 = 0
    for t in range(256):
        n0 += int(hist[t])
        s0 += t * int(hist[t])
        n1 = total_n - n0
        if n0 == 0 or n1 == 0:
            var = Fraction(0)
        else:
            s1 = total_s - s0
            # w0*w1*(mu0-mu1)^2 up to the constant factor 1/N^2
            var = Fraction((n1 * s0 - n0 * s1) ** 2, n0 * n1)
        if var > best:
            best, best_t = var, t
    return best_t


def otsu_binarize(img) -> np.ndarray:
    img = as_raster(img)
    t = otsu_threshold(img)
    return np.where(img > t, 255, 0).astype(np.uint8)


def resize_bilinear(img, width: int, height: int) -> np.ndarray:
    """Bilinear resampling on pixel centres with clamped edges."""
    img = as_raster(img)
    h, w = img.shape
    if (w, h) == (width, height):
        return img.copy()
    ys = (np.arange(height) + 0.5) * (h / height) - 0.5
    xs = (np.arange(width) + 0.5) * (w / width) - 0.5
    ys = np.clip(ys, 0, h - 1)
    xs = np.clip(xs, 0, w - 1)
    y0 = np.floor(ys).astype(int)
    x0 = np.floor(xs).astype(int)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    fy = (ys - y0)[:, None]
    fx = (xs - x0)[None, :]
    src = img.astype(np.float64)
    top = src[y0][:, x0] * (1 - fx) + src[y0][:, x1] * fx
    bottom = src[y1][:, x0] * (1 - fx) + src[y1][:, x1] * fx
    return _round_u8(top * (1 - fy) + bottom * fy)


def fit_box(width: int, height: int, box_w: int, box_h: int) -> tuple[int, int]:
    scale = min(box_w / width, box_h / height)
    new_w = min(box_w, max(1, int(np.floor(width * scale + 0.5))))
    new_h = min(box_h, max(1, int(np.floor(height * scale + 0.5))))
    return new_w, new_h


def normalize_size(img, cfg: PreprocessConfig | None = None) -> np.ndarray:
    cfg = cfg or PreprocessConfig()
    img = as_raster(img)
    h, w = img.shape
    tw, th = cfg.target_width, cfg.target_height
    new_w, new_h = fit_box(w, h, tw, th)
    scaled = resize_bilinear(img, new_w, new_h)
    canvas = np.full((th, tw), 255, dtype=np.uint8)
    x0 = (tw - new_w) // 2
    y0 = (th - new_h) // 2
    canvas[y0:y0 + new_h, x0:x0 + new_w] = scaled
    return canvas


def preprocess(img, cfg: PreprocessConfig | None = None) -> np.ndarray:
    cfg = cfg or PreprocessConfig()
    img = as_raster(img)
    if cfg.invert:
        img = invert(img)
    window = cfg.median_window
    if window > min(img.shape):
        # tiny crops: shrink the window rather than fail the whole batch
        window = max(1, min(img.shape) - (1 - min(img.shape) % 2))
    img = median_denoise(img, window)
    img = contrast_stretch(img, cfg.contrast_low_pct, cfg.contrast_high_pct)
    return normalize_size(img, cfg)


def to_luminance(image: Image.Image) -> np.ndarray:
    if image.mode != "L":
        image = image.convert("L")
    return np.array(image, dtype=np.uint8)


def read_png(path: str | Path) -> np.ndarray:
    with Image.open(path) as im:
        return to_luminance(im)


def png_bytes(img) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(as_raster(img)).save(buf, format="PNG")
    return buf.getvalue()


def decode_png(data: bytes) -> np.ndarray:
    with Image.open(io.BytesIO(data)) as im:
        return to_luminance(im)


def write_png(path: str | Path, img) -> None:
    atomic_write_bytes(path, png_bytes(img))
