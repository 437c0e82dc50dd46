"""Deterministic raster primitives used by every downstream stage.

Grayscale images are 2-D float64 arrays with intensities in [0, 1]
(``imageio`` handles the 8-bit file representation).  Binary masks are
2-D bool arrays.  All functions are pure: they never modify their inputs
and identical inputs give identical outputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import DimensionError, ParameterError

__all__ = [
    "Blob",
    "to_grayscale",
    "gaussian_kernel_1d",
    "gaussian_blur",
    "downsample_half",
    "sobel_vertical",
    "otsu_threshold",
    "binarize",
    "dilate_horizontal",
    "label_blobs",
]

LUMA_WEIGHTS = (0.299, 0.587, 0.114)


@dataclass(frozen=True)
class Blob:
    """One 8-connected component of a binary mask.

    ``bbox`` is (x_min, y_min, x_max, y_max) with inclusive pixel
    coordinates; ``fill_count`` equals ``area`` by construction.
    """

    label: int
    area: int
    bbox: tuple[int, int, int, int]
    fill_count: int


def to_grayscale(rgb) -> np.ndarray:
    """Convert an 8-bit RGB raster to 8-bit luma.

    Accepts an ``(h, w, 3)`` array or a sequence of three ``(h, w)``
    channel arrays.  Luma = 0.299 R + 0.587 G + 0.114 B, rounded half up.
    """
    if isinstance(rgb, (tuple, list)):
        if len(rgb) != 3:
            raise DimensionError("expected exactly three channels")
        chans = [np.asarray(c) for c in rgb]
        if not (chans[0].shape == chans[1].shape == chans[2].shape):
            raise DimensionError("channel dimensions do not match")
        if chans[0].ndim != 2:
            raise DimensionError("channels must be 2-D rasters")
        stacked = np.stack(chans, axis=-1)
    else:
        stacked = np.asarray(rgb)
        if stacked.ndim != 3 or stacked.shape[2] != 3:
            raise DimensionError(f"expected (h, w, 3) raster, got {stacked.shape}")
    r, g, b = (stacked[..., i].astype(np.float64) for i in range(3))
    luma = LUMA_WEIGHTS[0] * r + LUMA_WEIGHTS[1] * g + LUMA_WEIGHTS[2] * b
    return np.floor(luma + 0.5).clip(0, 255).astype(np.uint8)


def gaussian_kernel_1d(sigma: float) -> np.ndarray:
    """Normalized 1-D Gaussian kernel truncated at radius ceil(4*sigma)."""
    if sigma <= 0:
        raise ParameterError(f"sigma must be > 0, got {sigma}")
    radius = math.ceil(4.0 * sigma)
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    kernel = np.exp(-(x * x) / (2.0 * sigma * sigma))
    return kernel / kernel.sum()


def gaussian_blur(img: np.ndarray, sigma: float) -> np.ndarray:
    """Separable Gaussian filter with edge-replicated borders.

    Output has the same dimensions as the input; constant images are
    preserved up to float rounding.
    """
    kernel = gaussian_kernel_1d(sigma)
    arr = np.asarray(img, dtype=np.float64)
    out = ndimage.correlate1d(arr, kernel, axis=0, mode="nearest")
    out = ndimage.correlate1d(out, kernel, axis=1, mode="nearest")
    return out


def downsample_half(img: np.ndarray) -> np.ndarray:
    """Decimate by 2: output pixel (x, y) = input pixel (2x, 2y)."""
    arr = np.asarray(img)
    h, w = arr.shape
    if h < 2 or w < 2:
        raise DimensionError(f"image must be at least 2x2, got {w}x{h}")
    return arr[0 : (h // 2) * 2 : 2, 0 : (w // 2) * 2 : 2].copy()


def sobel_vertical(img: np.ndarray) -> np.ndarray:
    """Absolute response of the horizontal-derivative Sobel kernel.

    The kernel [[-1,0,1],[-2,0,2],[-1,0,1]] responds to vertical edges.
    Result is clamped to [0, 1] and the one-pixel border is zero.
    """
    arr = np.asarray(img, dtype=np.float64)
    h, w = arr.shape
    if h < 3 or w < 3:
        raise DimensionError(f"image must be at least 3x3, got {w}x{h}")
    out = np.zeros_like(arr)
    left = arr[:, :-2]
    right = arr[:, 2:]
    diff = right - left
    resp = diff[:-2, :] + 2.0 * diff[1:-1, :] + diff[2:, :]
    out[1:-1, 1:-1] = np.clip(np.abs(resp), 0.0, 1.0)
    return out


def otsu_threshold(img: np.ndarray) -> float:
    """Otsu threshold over the 256-bin histogram, returned in [0, 1].

    Intensities are quantized with round-half-up to 8-bit levels; the
    level t maximizing between-class variance (class split: level <= t
    vs. level > t, lowest t on ties) maps to the threshold t / 255.
    """
    arr = np.asarray(img, dtype=np.float64)
    levels = np.floor(np.clip(arr, 0.0, 1.0) * 255.0 + 0.5).astype(np.int64)
    hist = np.bincount(levels.ravel(), minlength=256).astype(np.float64)
    total = hist.sum()
    w0 = np.cumsum(hist)
    m0 = np.cumsum(hist * np.arange(256))
    mean_total = m0[-1]
    w1 = total - w0
    valid = (w0 > 0) & (w1 > 0)
    variance = np.zeros(256)
    mu0 = np.divide(m0, w0, out=np.zeros(256), where=w0 > 0)
    mu1 = np.divide(mean_total - m0, w1, out=np.zeros(256), where=w1 > 0)
    variance[valid] = (w0 * w1)[valid] * (mu0 - mu1)[valid] ** 2
    return int(np.argmax(variance)) / 255.0


def binarize(img: np.ndarray, threshold: float | None = None) -> np.ndarray:
    """Threshold an image: ``mask = img > t``.

    ``threshold=None`` selects the Otsu threshold; a float in [0, 1]
    applies a fixed threshold.
    """
    if threshold is None:
        t = otsu_threshold(img)
    else:
        t = float(threshold)
        if not 0.0 <= t <= 1.0:
            raise ParameterError(f"fixed threshold must lie in [0, 1], got {t}")
    return np.asarray(img, dtype=np.float64) > t


def dilate_horizontal(mask: np.ndarray, half_width: int) -> np.ndarray:
    """Set each pixel whose row has any set pixel within +-half_width columns."""
    if half_width < 1:
        raise ParameterError(f"half_width must be >= 1, got {half_width}")
    src = np.asarray(mask, dtype=bool)
    out = src.copy()
    for shift in range(1, half_width + 1):
        out[:, shift:] |= src[:, :-shift]
        out[:, :-shift] |= src[:, shift:]
    return out


def _row_runs(row: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Inclusive (start, end) column indices of True runs in one row."""
    padded = np.zeros(row.size + 2, dtype=np.int8)
    padded[1:-1] = row
    d = np.diff(padded)
    starts = np.nonzero(d == 1)[0]
    ends = np.nonzero(d == -1)[0] - 1
    return starts, ends


def label_blobs(mask: np.ndarray) -> list[Blob]:
    """8-connected components of a binary mask.

    Labels are assigned in raster order of each component's first pixel,
    starting at 1.  Uses run-based union-find, so cost scales with the
    number of runs rather than pixels.
    """
    src = np.asarray(mask, dtype=bool)
    h, w = src.shape

    parent: list[int] = []

    def find(i: int) -> int:
        root = i
        while parent[root] != root:
            root = parent[root]
        while parent[i] != root:
            parent[i], i = root, parent[i]
        return root

    def union(a: int, b: int) -> None:
        ra, rb = find(a), find(b)
        if ra != rb:
            if ra < rb:
                parent[rb] = ra
            else:
                parent[ra] = rb

    runs: list[tuple[int, int, int]] = []  # (row, col_start, col_end) inclusive
    prev: list[int] = []  # run ids of the previous row
    for y in range(h):
        starts, ends = _row_runs(src[y])
        cur: list[int] = []
        for cs, ce in zip(starts, ends):
            rid = len(runs)
            runs.append((y, int(cs), int(ce)))
            parent.append(rid)
            cur.append(rid)
            for pid in prev:
                ps, pe = runs[pid][1], runs[pid][2]
                if cs <= pe + 1 and ps <= ce + 1:  # 8-connectivity
                    union(rid, pid)
        prev = cur

    groups: dict[int, list[int]] = {}
    order: list[int] = []
    for rid in range(len(runs)):
        root = find(rid)
        if root not in groups:
            groups[root] = []
            order.append(root)
        groups[root].append(rid)

    blobs: list[Blob] = []
    for label, root in enumerate(order, start=1):
        members = groups[root]
        area = 0
        x_min = w
        x_max = -1
        y_min = h
        y_max = -1
        for rid in members:
            y, cs, ce = runs[rid]
            area += ce - cs + 1
            x_min = min(x_min, cs)
            x_max = max(x_max, ce)
            y_min = min(y_min, y)
            y_max = max(y_max, y)
        blobs.append(
            Blob(label=label, area=area, bbox=(x_min, y_min, x_max, y_max), fill_count=area)
        )
    return blobs
