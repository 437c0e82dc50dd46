"""Scale-invariant feature extraction, written from scratch.

Pipeline: Gaussian scale-space pyramid -> difference-of-Gaussians ->
3x3x3 extrema -> sub-voxel refinement with contrast / edge rejection ->
orientation assignment -> 128-d descriptors (4x4 spatial x 8 orientation
bins, trilinearly interpolated).

Everything is deterministic: identical input and parameters produce the
identical keypoint list, sorted by (octave, scale_index, y, x,
orientation).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import DimensionError
from .imageops import downsample_half, gaussian_blur

__all__ = [
    "SiftParams",
    "ScaleSpace",
    "DoGSpace",
    "Keypoint",
    "build_scale_space",
    "compute_dog",
    "detect_extrema",
    "refine_keypoints",
    "assign_orientations",
    "compute_descriptors",
    "extract_features",
]

DESCRIPTOR_SIZE = 128
ORIENTATION_BINS = 36
_MIN_OCTAVE_DIM = 8


@dataclass(frozen=True)
class SiftParams:
    """Extraction parameters; defaults follow the classic formulation."""

    scales_per_octave: int = 3
    base_sigma: float = 1.6
    octave_count: int | None = None  # None = auto from image size
    assumed_blur: float = 0.5
    contrast_threshold: float = 0.03  # on [0, 1] intensities
    edge_ratio: float = 10.0
    upsample: bool = False  # optional initial 2x upscale

    @property
    def k(self) -> float:
        return 2.0 ** (1.0 / self.scales_per_octave)


@dataclass
class ScaleSpace:
    """Gaussian pyramid: ``octaves[o][i]`` has relative blur base_sigma * k^i."""

    octaves: list[list[np.ndarray]]
    params: SiftParams
    input_size: tuple[int, int]  # (w, h) of the image handed in
    coord_scale: float = 1.0  # base-image coords * coord_scale = input coords

    def sigma_rel(self, index: int) -> float:
        """Blur of image ``index`` relative to its octave's resolution."""
        return self.params.base_sigma * self.params.k ** index

    def sigma_abs(self, octave: int, index: float) -> float:
        """Absolute blur in input-image pixels (fractional index allowed)."""
        return (
            self.params.base_sigma
            * self.params.k ** index
            * 2.0 ** octave
            * self.coord_scale
        )


@dataclass
class DoGSpace:
    """Difference-of-Gaussians stacks, one 3-D array per octave."""

    octaves: list[np.ndarray]  # each (s + 2, h, w)


@dataclass(frozen=True)
class Keypoint:
    """A localized, scale- and orientation-assigned interest point.

    ``x``/``y`` are sub-pixel coordinates in the input image, ``sigma``
    the absolute scale, ``orientation`` radians in [0, 2pi).  ``octave``
    and ``scale_index`` record pyramid provenance; ``contrast`` is the
    interpolated |DoG| value.
    """

    x: float
    y: float
    sigma: float
    orientation: float
    octave: int
    scale_index: int
    contrast: float

    def sort_key(self):
        return (self.octave, self.scale_index, self.y, self.x, self.orientation)


def _auto_octave_count(w: int, h: int) -> int:
    return int(math.floor(math.log2(min(w, h)))) - 3


def _upsample_2x(img: np.ndarray) -> np.ndarray:
    """Bilinear 2x upscale (optional pyramid seed)."""
    h, w = img.shape
    ys = np.arange(2 * h) / 2.0
    xs = np.arange(2 * w) / 2.0
    y0 = np.clip(ys.astype(int), 0, h - 1)
    y1 = np.clip(y0 + 1, 0, h - 1)
    x0 = np.clip(xs.astype(int), 0, w - 1)
    x1 = np.clip(x0 + 1, 0, w - 1)
    fy = (ys - y0)[:, None]
    fx = (xs - x0)[None, :]
    top = img[np.ix_(y0, x0)] * (1 - fx) + img[np.ix_(y0, x1)] * fx
    bot = img[np.ix_(y1, x0)] * (1 - fx) + img[np.ix_(y1, x1)] * fx
    return top * (1 - fy) + bot * fy


def build_scale_space(img: np.ndarray, params: SiftParams = SiftParams()) -> ScaleSpace:
    """Build the Gaussian pyramid.

    Each octave holds s + 3 images with relative blurs base_sigma * k^i;
    the next octave is seeded by decimating the image whose relative blur
    is 2 * base_sigma.  The input is assumed pre-blurred by
    ``assumed_blur`` and brought up to ``base_sigma`` with one extra blur.
    """
    arr = np.asarray(img, dtype=np.float64)
    in_h, in_w = arr.shape
    coord_scale = 1.0
    assumed = params.assumed_blur
    if params.upsample:
        arr = _upsample_2x(arr)
        assumed = 2.0 * params.assumed_blur
        coord_scale = 0.5
    h, w = arr.shape

    n_oct = params.octave_count
    if n_oct is None:
        n_oct = _auto_octave_count(w, h)
    if n_oct < 1:
        raise DimensionError(f"image {w}x{h} too small for a scale-space pyramid")
    smallest = min(w, h) // 2 ** (n_oct - 1)
    if smallest < _MIN_OCTAVE_DIM:
        raise DimensionError(
            f"octave_count={n_oct} leaves a {smallest}px octave; need >= {_MIN_OCTAVE_DIM}px"
        )

    s = params.scales_per_octave
    k = params.k
    if params.base_sigma > assumed:
        seed = gaussian_blur(arr, math.sqrt(params.base_sigma**2 - assumed**2))
    else:
        seed = arr.copy()

    # blur increments within an octave: sigma_i^2 = sigma_{i-1}^2 + inc_i^2
    increments = [
        params.base_sigma * k ** (i - 1) * math.sqrt(k * k - 1.0)
        for i in range(1, s + 3)
    ]

    octaves: list[list[np.ndarray]] = []
    for _ in range(n_oct):
        layers = [seed]
        for inc in increments:
            layers.append(gaussian_blur(layers[-1], inc))
        octaves.append(layers)
        seed = downsample_half(layers[s])  # relative blur 2 * base_sigma
    return ScaleSpace(octaves=octaves, params=params, input_size=(in_w, in_h), coord_scale=coord_scale)


def compute_dog(ss: ScaleSpace) -> DoGSpace:
    """Difference of adjacent Gaussian images: D[i] = G[i+1] - G[i]."""
    stacks = []
    for layers in ss.octaves:
        stacks.append(np.stack([layers[i + 1] - layers[i] for i in range(len(layers) - 1)]))
    return DoGSpace(octaves=stacks)


def detect_extrema(dog: DoGSpace, contrast_prefilter: float) -> list[tuple[int, int, int, int]]:
    """Raw scale-space extrema as (octave, scale_index, x, y) tuples.

    A sample qualifies when it is strictly greater (or strictly less)
    than all 26 neighbors in its 3x3x3 cube and |value| is at least
    half of ``contrast_prefilter``.
    """
    thr = 0.5 * contrast_prefilter
    out: list[tuple[int, int, int, int]] = []
    for o, vol in enumerate(dog.octaves):
        n, h, w = vol.shape
        if h < 3 or w < 3 or n < 3:
            continue
        center = vol[1:-1, 1:-1, 1:-1]
        gt = np.ones(center.shape, dtype=bool)
        lt = np.ones(center.shape, dtype=bool)
        for ds in (-1, 0, 1):
            for dy in (-1, 0, 1):
                for dx in (-1, 0, 1):
                    if ds == 0 and dy == 0 and dx == 0:
                        continue
                    nb = vol[
                        1 + ds : n - 1 + ds,
                        1 + dy : h - 1 + dy,
                        1 + dx : w - 1 + dx,
                    ]
                    gt &= center > nb
                    lt &= center < nb
        keep = (gt | lt) & (np.abs(center) >= thr)
        ss_idx, ys, xs = np.nonzero(keep)
        for si, y, x in zip(ss_idx, ys, xs):
            out.append((o, int(si) + 1, int(x) + 1, int(y) + 1))
    return out


def _gradient_3d(cube: np.ndarray) -> np.ndarray:
    """(dD/dx, dD/dy, dD/ds) central differences at the cube center."""
    return 0.5 * np.array(
        [
            cube[1, 1, 2] - cube[1, 1, 0],
            cube[1, 2, 1] - cube[1, 0, 1],
            cube[2, 1, 1] - cube[0, 1, 1],
        ]
    )


def _hessian_3d(cube: np.ndarray) -> np.ndarray:
    c = cube[1, 1, 1]
    dxx = cube[1, 1, 2] - 2.0 * c + cube[1, 1, 0]
    dyy = cube[1, 2, 1] - 2.0 * c + cube[1, 0, 1]
    dss = cube[2, 1, 1] - 2.0 * c + cube[0, 1, 1]
    dxy = 0.25 * (cube[1, 2, 2] - cube[1, 2, 0] - cube[1, 0, 2] + cube[1, 0, 0])
    dxs = 0.25 * (cube[2, 1, 2] - cube[2, 1, 0] - cube[0, 1, 2] + cube[0, 1, 0])
    dys = 0.25 * (cube[2, 2, 1] - cube[2, 0, 1] - cube[0, 2, 1] + cube[0, 0, 1])
    return np.array([[dxx, dxy, dxs], [dxy, dyy, dys], [dxs, dys, dss]])


def refine_keypoints(
    candidates: list[tuple[int, int, int, int]],
    dog: DoGSpace,
    params: SiftParams = SiftParams(),
) -> list[Keypoint]:
    """Sub-voxel refinement with contrast and edge rejection.

    Quadratic interpolation of the extremum, re-localizing up to 5 times
    while any offset component exceeds 0.5; survivors must have
    interpolated |D| >= contrast_threshold and a spatial Hessian with
    trace^2/det < (r+1)^2/r.
    """
    s = params.scales_per_octave
    r = params.edge_ratio
    edge_bound = (r + 1.0) ** 2 / r
    keypoints: list[Keypoint] = []
    seen: set[tuple] = set()

    for octave, si, x, y in candidates:
        vol = dog.octaves[octave]
        _, h, w = vol.shape
        converged = False
        offset = np.zeros(3)
        grad = np.zeros(3)
        for _ in range(5):
            cube = vol[si - 1 : si + 2, y - 1 : y + 2, x - 1 : x + 2]
            grad = _gradient_3d(cube)
            hess = _hessian_3d(cube)
            try:
                offset = -np.linalg.solve(hess, grad)
            except np.linalg.LinAlgError:
                break
            if np.all(np.abs(offset) < 0.5):
                converged = True
                break
            x += int(round(offset[0]))
            y += int(round(offset[1]))
            si += int(round(offset[2]))
            if not (1 <= si <= s and 1 <= x <= w - 2 and 1 <= y <= h - 2):
                break
        if not converged:
            continue

        cube = vol[si - 1 : si + 2, y - 1 : y + 2, x - 1 : x + 2]
        value = cube[1, 1, 1] + 0.5 * float(grad @ offset)
        if abs(value) < params.contrast_threshold:
            continue
        dxx = cube[1, 1, 2] - 2.0 * cube[1, 1, 1] + cube[1, 1, 0]
        dyy = cube[1, 2, 1] - 2.0 * cube[1, 1, 1] + cube[1, 0, 1]
        dxy = 0.25 * (cube[1, 2, 2] - cube[1, 2, 0] - cube[1, 0, 2] + cube[1, 0, 0])
        trace = dxx + dyy
        det = dxx * dyy - dxy * dxy
        if det <= 0 or trace * trace / det >= edge_bound:
            continue

        scale_mult = 2.0 ** octave
        bx = (x + float(offset[0])) * scale_mult
        by = (y + float(offset[1])) * scale_mult
        sigma = params.base_sigma * params.k ** (si + float(offset[2])) * scale_mult
        key = (octave, si, round(bx, 6), round(by, 6), round(sigma, 6))
        if key in seen:
            continue
        seen.add(key)
        keypoints.append(
            Keypoint(
                x=bx,
                y=by,
                sigma=sigma,
                orientation=0.0,
                octave=octave,
                scale_index=si,
                contrast=abs(value),
            )
        )

    # clip to the base image bounds (refinement can push border points out)
    base = dog.octaves[0].shape
    in_h, in_w = base[1], base[2]
    return [kp for kp in keypoints if 0.0 <= kp.x < in_w and 0.0 <= kp.y < in_h]


def _orientation_histogram(
    img: np.ndarray, x_c: float, y_c: float, weight_sigma: float
) -> np.ndarray:
    """36-bin gradient orientation histogram, Gaussian-weighted."""
    h, w = img.shape
    radius = int(round(3.0 * weight_sigma))
    cx = int(round(x_c))
    cy = int(round(y_c))
    x0 = max(1, cx - radius)
    x1 = min(w - 2, cx + radius)
    y0 = max(1, cy - radius)
    y1 = min(h - 2, cy + radius)
    hist = np.zeros(ORIENTATION_BINS)
    if x0 > x1 or y0 > y1:
        return hist
    sub = img[y0 - 1 : y1 + 2, x0 - 1 : x1 + 2]
    gx = 0.5 * (sub[1:-1, 2:] - sub[1:-1, :-2])
    gy = 0.5 * (sub[:-2, 1:-1] - sub[2:, 1:-1])  # image y axis points down
    mag = np.hypot(gx, gy)
    theta = np.mod(np.arctan2(gy, gx), 2.0 * np.pi)
    ys, xs = np.mgrid[y0 : y1 + 1, x0 : x1 + 1]
    weight = np.exp(-((xs - x_c) ** 2 + (ys - y_c) ** 2) / (2.0 * weight_sigma**2))
    bins = np.floor(theta * (ORIENTATION_BINS / (2.0 * np.pi))).astype(int) % ORIENTATION_BINS
    return np.bincount(bins.ravel(), weights=(mag * weight).ravel(), minlength=ORIENTATION_BINS)


def _histogram_peaks(hist: np.ndarray) -> list[float]:
    """Peak bin positions (>= 80% of max), parabolically refined.

    When no strict local peak exists (flat histogram), the lowest-index
    maximum bin is used so that every keypoint receives an orientation.
    """
    maxv = hist.max()
    if maxv <= 0.0:
        return [0.0]
    prev = np.roll(hist, 1)
    nxt = np.roll(hist, -1)
    idx = np.nonzero((hist > prev) & (hist > nxt) & (hist >= 0.8 * maxv))[0]
    if idx.size == 0:
        idx = np.array([int(np.argmax(hist))])
    positions = []
    for i in idx:
        denom = prev[i] - 2.0 * hist[i] + nxt[i]
        if abs(denom) < 1e-12:
            p = float(i)
        else:
            p = i + 0.5 * (prev[i] - nxt[i]) / denom
        positions.append(p % ORIENTATION_BINS)
    return positions


def assign_orientations(keypoints: list[Keypoint], ss: ScaleSpace) -> list[Keypoint]:
    """Attach dominant gradient orientations; peaks >= 80% of the maximum
    each yield their own oriented copy of the keypoint."""
    out: list[Keypoint] = []
    two_pi = 2.0 * np.pi
    for kp in keypoints:
        img = ss.octaves[kp.octave][kp.scale_index]
        scale_mult = 2.0 ** kp.octave  # keypoints carry base-image coordinates
        x_o = kp.x / scale_mult
        y_o = kp.y / scale_mult
        sigma_o = kp.sigma / scale_mult
        hist = _orientation_histogram(img, x_o, y_o, 1.5 * sigma_o)
        if hist.max() <= 0.0:
            continue
        for p in _histogram_peaks(hist):
            theta = (p * two_pi / ORIENTATION_BINS) % two_pi
            out.append(replace(kp, orientation=theta))
    return out


class _GradientCache:
    """Per pyramid image central-difference gradients, computed lazily."""

    def __init__(self, ss: ScaleSpace):
        self.ss = ss
        self._cache: dict[tuple[int, int], tuple[np.ndarray, np.ndarray]] = {}

    def get(self, octave: int, index: int) -> tuple[np.ndarray, np.ndarray]:
        key = (octave, index)
        if key not in self._cache:
            img = self.ss.octaves[octave][index]
            gx = np.zeros_like(img)
            gy = np.zeros_like(img)
            gx[:, 1:-1] = 0.5 * (img[:, 2:] - img[:, :-2])
            # same upward-positive convention as _orientation_histogram
            gy[1:-1, :] = 0.5 * (img[:-2, :] - img[2:, :])
            self._cache[key] = (gx, gy)
        return self._cache[key]


def compute_descriptors(
    keypoints: list[Keypoint], ss: ScaleSpace
) -> tuple[list[Keypoint], np.ndarray]:
    """128-d descriptors for oriented keypoints.

    A 16x16 sample grid (spacing = the keypoint's octave-relative scale)
    is rotated to the keypoint orientation; gradients are accumulated
    into 4x4 spatial x 8 orientation bins with trilinear interpolation
    and Gaussian weighting (sigma = half the window width).  Descriptors
    are normalized, clamped at 0.2 and renormalized.  Keypoints whose
    sample window falls entirely outside the image (or has no gradient
    energy) are dropped; kept keypoints parallel the returned rows.
    """
    grads = _GradientCache(ss)
    grid = np.arange(16) - 7.5
    u, v = np.meshgrid(grid, grid)  # u: rotated-frame x, v: rotated-frame y
    spatial_weight = np.exp(-(u**2 + v**2) / (2.0 * 8.0**2))
    two_pi = 2.0 * np.pi

    kept: list[Keypoint] = []
    rows: list[np.ndarray] = []
    for kp in keypoints:
        img = ss.octaves[kp.octave][kp.scale_index]
        h, w = img.shape
        scale_mult = 2.0 ** kp.octave  # base-image coordinates
        x_o = kp.x / scale_mult
        y_o = kp.y / scale_mult
        sigma_o = kp.sigma / scale_mult
        cos_t = math.cos(kp.orientation)
        sin_t = math.sin(kp.orientation)

        px = np.rint(x_o + (u * cos_t - v * sin_t) * sigma_o).astype(int)
        py = np.rint(y_o + (u * sin_t + v * cos_t) * sigma_o).astype(int)
        valid = (px >= 1) & (px <= w - 2) & (py >= 1) & (py <= h - 2)
        if not valid.any():
            continue

        gx_map, gy_map = grads.get(kp.octave, kp.scale_index)
        gx = gx_map[py[valid], px[valid]]
        gy = gy_map[py[valid], px[valid]]
        mag = np.hypot(gx, gy) * spatial_weight[valid]
        theta_rel = np.mod(np.arctan2(gy, gx) - kp.orientation, two_pi)

        row_bin = v[valid] / 4.0 + 1.5
        col_bin = u[valid] / 4.0 + 1.5
        ori_bin = theta_rel * (8.0 / two_pi)

        hist = np.zeros((6, 6, 8))
        r0 = np.floor(row_bin).astype(int)
        c0 = np.floor(col_bin).astype(int)
        o0 = np.floor(ori_bin).astype(int)
        fr = row_bin - r0
        fc = col_bin - c0
        fo = ori_bin - o0
        o0 %= 8
        for dr in (0, 1):
            wr = mag * (fr if dr else 1.0 - fr)
            for dc in (0, 1):
                wc = wr * (fc if dc else 1.0 - fc)
                for do in (0, 1):
                    wo = wc * (fo if do else 1.0 - fo)
                    np.add.at(hist, (r0 + 1 + dr, c0 + 1 + dc, (o0 + do) % 8), wo)

        vec = hist[1:5, 1:5, :].ravel()
        norm = np.linalg.norm(vec)
        if norm < 1e-12:
            continue
        vec = np.minimum(vec / norm, 0.2)
        vec /= np.linalg.norm(vec)
        kept.append(kp)
        rows.append(vec)

    if rows:
        return kept, np.vstack(rows)
    return kept, np.zeros((0, DESCRIPTOR_SIZE))


def extract_features(
    img: np.ndarray, params: SiftParams = SiftParams()
) -> tuple[list[Keypoint], np.ndarray]:
    """Full extraction: pyramid, DoG, detection, refinement, orientation,
    description.  Returns keypoints in canonical order with a parallel
    (n, 128) descriptor matrix."""
    ss = build_scale_space(img, params)
    dog = compute_dog(ss)
    cands = detect_extrema(dog, params.contrast_threshold)
    kps = refine_keypoints(cands, dog, params)
    oriented = assign_orientations(kps, ss)
    oriented.sort(key=Keypoint.sort_key)
    kept, desc = compute_descriptors(oriented, ss)
    if ss.coord_scale != 1.0:  # map back from the upsampled base image
        cs = ss.coord_scale
        kept = [replace(kp, x=kp.x * cs, y=kp.y * cs, sigma=kp.sigma * cs) for kp in kept]
    return kept, desc
