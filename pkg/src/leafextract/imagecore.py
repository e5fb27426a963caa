"""Pixel containers, color conversion, gradients, morphology and region
utilities shared by every pipeline stage.

Images are plain NumPy arrays:

* RGB images are ``(H, W, 3)`` ``uint8`` arrays.
* Grayscale images are ``(H, W)`` arrays, ``uint8`` or ``float64``.
* Binary masks are ``(H, W)`` ``bool`` arrays.
* Label maps are ``(H, W)`` ``int32`` arrays, 0 meaning unassigned/ridge.

Geometry uses the pixel-center convention: pixel ``(row, col)`` sits at
``x = col``, ``y = row``.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np
from scipy import ndimage as ndi

__all__ = [
    "HsiPlanes",
    "as_rgb",
    "resize_longest_side",
    "resize_mask_nearest",
    "to_grayscale",
    "rgb_to_hsi",
    "gradient_magnitude",
    "disk",
    "square",
    "erode",
    "dilate",
    "connected_components",
    "distance_to_mask",
    "convex_hull",
    "convex_hull_area",
    "polygon_area",
    "detect_edges",
]


class HsiPlanes(NamedTuple):
    """Hue in degrees [0, 360), saturation and intensity in [0, 1].

    ``hue_defined`` is False exactly where saturation is 0; hue is NaN there.
    """

    hue: np.ndarray
    saturation: np.ndarray
    intensity: np.ndarray
    hue_defined: np.ndarray


def _round_half_up(x):
    return np.floor(np.asarray(x, dtype=np.float64) + 0.5)


def as_rgb(img) -> np.ndarray:
    """Validate and return ``img`` as an ``(H, W, 3)`` uint8 array."""
    arr = np.asarray(img)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ValueError(f"expected an (H, W, 3) RGB image, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError("image must be at least 1x1")
    if arr.dtype != np.uint8:
        if np.any(arr < 0) or np.any(arr > 255):
            raise ValueError("channel values must lie in [0, 255]")
        arr = arr.astype(np.uint8)
    return arr


# ---------------------------------------------------------------------------
# resizing
# ---------------------------------------------------------------------------

def _target_size(h: int, w: int, limit: int) -> tuple[int, int]:
    scale = limit / max(h, w)
    if h >= w:
        return limit, max(1, int(_round_half_up(w * scale)))
    return max(1, int(_round_half_up(h * scale))), limit


def _bilinear_axis(n_src: int, n_dst: int):
    # pixel-center alignment: dst center i maps to src (i + 0.5) * n_src / n_dst - 0.5
    pos = (np.arange(n_dst) + 0.5) * (n_src / n_dst) - 0.5
    pos = np.clip(pos, 0.0, n_src - 1)
    lo = np.floor(pos).astype(np.intp)
    hi = np.minimum(lo + 1, n_src - 1)
    frac = pos - lo
    return lo, hi, frac


def resize_longest_side(img: np.ndarray, limit: int = 600) -> np.ndarray:
    """Shrink ``img`` so its longer side equals ``limit`` pixels.

    Images whose longer side is already ``<= limit`` are returned unchanged.
    The shorter side is scaled by the same factor and rounded half up;
    resampling is bilinear.
    """
    if limit < 1:
        raise ValueError("limit must be >= 1")
    img = np.asarray(img)
    h, w = img.shape[:2]
    if max(h, w) <= limit:
        return img
    nh, nw = _target_size(h, w, limit)
    r0, r1, fr = _bilinear_axis(h, nh)
    c0, c1, fc = _bilinear_axis(w, nw)
    src = img.astype(np.float64)
    fr = fr[:, None] if img.ndim == 2 else fr[:, None, None]
    rows = src[r0] * (1.0 - fr) + src[r1] * fr
    fc = fc[None, :] if img.ndim == 2 else fc[None, :, None]
    out = rows[:, c0] * (1.0 - fc) + rows[:, c1] * fc
    if img.dtype == np.uint8:
        return np.clip(_round_half_up(out), 0, 255).astype(np.uint8)
    return out.astype(img.dtype)


def resize_mask_nearest(mask: np.ndarray, shape: tuple[int, int]) -> np.ndarray:
    """Nearest-neighbor resample of a binary mask to ``shape``."""
    mask = np.asarray(mask, dtype=bool)
    h, w = mask.shape
    nh, nw = shape
    if (h, w) == (nh, nw):
        return mask.copy()
    rows = np.minimum(((np.arange(nh) + 0.5) * h / nh).astype(np.intp), h - 1)
    cols = np.minimum(((np.arange(nw) + 0.5) * w / nw).astype(np.intp), w - 1)
    return mask[np.ix_(rows, cols)]


# ---------------------------------------------------------------------------
# color
# ---------------------------------------------------------------------------

def to_grayscale(img: np.ndarray) -> np.ndarray:
    """BT.601 luma, rounded half up, as uint8."""
    rgb = as_rgb(img).astype(np.float64)
    y = 0.299 * rgb[..., 0] + 0.587 * rgb[..., 1] + 0.114 * rgb[..., 2]
    return np.clip(_round_half_up(y), 0, 255).astype(np.uint8)


def rgb_to_hsi(img: np.ndarray) -> HsiPlanes:
    """Convert to HSI using the arccos hue formula."""
    rgb = as_rgb(img).astype(np.float64)
    r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
    total = r + g + b
    intensity = total / (3.0 * 255.0)
    mean = total / 3.0
    mn = np.minimum(np.minimum(r, g), b)
    with np.errstate(invalid="ignore", divide="ignore"):
        saturation = np.where(mean > 0, 1.0 - mn / np.where(mean > 0, mean, 1.0), 0.0)
    # exact zero for achromatic pixels (avoids 1 - 1 round-off)
    achromatic = (r == g) & (g == b)
    saturation[achromatic] = 0.0

    num = 0.5 * ((r - g) + (r - b))
    den = np.sqrt((r - g) ** 2 + (r - b) * (g - b))
    with np.errstate(invalid="ignore", divide="ignore"):
        cos_t = np.where(den > 0, num / np.where(den > 0, den, 1.0), 1.0)
    theta = np.degrees(np.arccos(np.clip(cos_t, -1.0, 1.0)))
    hue = np.where(b > g, 360.0 - theta, theta) % 360.0
    hue_defined = ~achromatic
    hue = np.where(hue_defined, hue, np.nan)
    return HsiPlanes(hue, saturation, intensity, hue_defined)


# ---------------------------------------------------------------------------
# gradients
# ---------------------------------------------------------------------------

def gradient_magnitude(img: np.ndarray) -> np.ndarray:
    """Sobel gradient magnitude with edge-replicated borders."""
    f = np.asarray(img, dtype=np.float64)
    gx = ndi.sobel(f, axis=1, mode="nearest")
    gy = ndi.sobel(f, axis=0, mode="nearest")
    return np.hypot(gx, gy)


# ---------------------------------------------------------------------------
# morphology
# ---------------------------------------------------------------------------

def disk(radius: int) -> np.ndarray:
    """Disk structuring element: offsets with ``dx**2 + dy**2 <= r**2``."""
    if radius < 0:
        raise ValueError("radius must be >= 0")
    r = int(radius)
    yy, xx = np.mgrid[-r:r + 1, -r:r + 1]
    return (xx * xx + yy * yy) <= r * r


def square(side: int) -> np.ndarray:
    if side < 1:
        raise ValueError("side must be >= 1")
    return np.ones((side, side), dtype=bool)


def erode(img: np.ndarray, footprint: np.ndarray) -> np.ndarray:
    """Flat erosion. Pixels outside the image count as foreground / +inf."""
    img = np.asarray(img)
    if img.dtype == bool:
        return ndi.binary_erosion(img, structure=footprint, border_value=1)
    return ndi.grey_erosion(img, footprint=footprint, mode="nearest")


def dilate(img: np.ndarray, footprint: np.ndarray) -> np.ndarray:
    """Flat dilation. Pixels outside the image count as background / -inf."""
    img = np.asarray(img)
    if img.dtype == bool:
        return ndi.binary_dilation(img, structure=footprint, border_value=0)
    return ndi.grey_dilation(img, footprint=footprint, mode="nearest")


# ---------------------------------------------------------------------------
# regions
# ---------------------------------------------------------------------------

_STRUCTURE = {
    4: ndi.generate_binary_structure(2, 1),
    8: ndi.generate_binary_structure(2, 2),
}


def connected_components(mask: np.ndarray, connectivity: int = 8) -> tuple[np.ndarray, int]:
    """Label connected foreground regions.

    Returns ``(labels, count)``. Labels run 1..count in order of each region's
    first pixel in raster scan order.
    """
    if connectivity not in _STRUCTURE:
        raise ValueError("connectivity must be 4 or 8")
    labels, count = ndi.label(np.asarray(mask, dtype=bool), structure=_STRUCTURE[connectivity])
    return labels.astype(np.int32), int(count)


def distance_to_mask(mask: np.ndarray) -> np.ndarray:
    """Exact Euclidean distance from every pixel to the nearest mask pixel."""
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        raise ValueError("no reference pixels")
    return ndi.distance_transform_edt(~mask)


def _region_points(region) -> np.ndarray:
    """(N, 2) float array of (x, y) from a mask or a coordinate array."""
    arr = np.asarray(region)
    if arr.dtype == bool and arr.ndim == 2:
        rows, cols = np.nonzero(arr)
        return np.column_stack([cols, rows]).astype(np.float64)
    arr = np.asarray(arr, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError("region must be a boolean mask or an (N, 2) array of (x, y)")
    return arr


def _row_extremes(mask: np.ndarray) -> np.ndarray:
    """Leftmost and rightmost (x, y) of each occupied row; enough for a hull."""
    rows = np.flatnonzero(mask.any(axis=1))
    if rows.size == 0:
        return np.empty((0, 2))
    sub = mask[rows]
    left = np.argmax(sub, axis=1)
    right = sub.shape[1] - 1 - np.argmax(sub[:, ::-1], axis=1)
    pts = np.concatenate([np.column_stack([left, rows]), np.column_stack([right, rows])])
    return pts.astype(np.float64)


def convex_hull(points: np.ndarray) -> np.ndarray:
    """Monotone-chain convex hull, counter-clockwise, collinear points dropped."""
    pts = np.unique(np.asarray(points, dtype=np.float64), axis=0)
    if len(pts) <= 2:
        return pts
    # np.unique sorts lexicographically by (x, y)
    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower: list = []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper: list = []
    for p in pts[::-1]:
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return np.array(lower[:-1] + upper[:-1])


def polygon_area(vertices: np.ndarray) -> float:
    """Shoelace area of a simple polygon (absolute value)."""
    v = np.asarray(vertices, dtype=np.float64)
    if len(v) < 3:
        return 0.0
    x, y = v[:, 0], v[:, 1]
    return 0.5 * abs(float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))


_CORNERS = np.array([[-0.5, -0.5], [0.5, -0.5], [0.5, 0.5], [-0.5, 0.5]])


def hull_points(region, corners: bool = False) -> np.ndarray:
    """Candidate hull points of a region (mask or (x, y) array).

    With ``corners=True`` each pixel contributes the four corners of its unit
    square instead of its center.
    """
    arr = np.asarray(region)
    if arr.dtype == bool and arr.ndim == 2:
        pts = _row_extremes(arr)
    else:
        pts = _region_points(arr)
    if corners and len(pts):
        pts = (pts[:, None, :] + _CORNERS[None, :, :]).reshape(-1, 2)
    return pts


def convex_hull_area(region, corners: bool = False) -> float:
    """Area of the convex hull of a region.

    By default the hull spans pixel centers, so a filled ``w x h`` rectangle
    has area ``(w - 1) * (h - 1)`` and collinear regions have area 0. With
    ``corners=True`` the hull spans the pixel squares instead (the
    rectangle's area is then ``w * h``); solidity uses this form.
    """
    pts = hull_points(region, corners=corners)
    if len(pts) == 0:
        raise ValueError("empty region")
    return polygon_area(convex_hull(pts))


# ---------------------------------------------------------------------------
# edges
# ---------------------------------------------------------------------------

def _nms(mag: np.ndarray, gx: np.ndarray, gy: np.ndarray) -> np.ndarray:
    h, w = mag.shape
    pad = np.pad(mag, 1, mode="constant")
    angle = np.rad2deg(np.arctan2(gy, gx)) % 180.0
    # quantize the gradient direction to one of four neighbor axes
    sector = (np.floor((angle + 22.5) / 45.0).astype(np.intp)) % 4
    # (drow, dcol) of the neighbor in the +gradient direction (y grows downward)
    steps = np.array([(0, 1), (1, 1), (1, 0), (1, -1)])
    dr = steps[sector, 0]
    dc = steps[sector, 1]
    rr, cc = np.mgrid[0:h, 0:w]
    ahead = pad[rr + 1 + dr, cc + 1 + dc]
    behind = pad[rr + 1 - dr, cc + 1 - dc]
    # strict on one side, non-strict on the other: a plateau of two equal
    # responses keeps exactly one pixel
    keep = (mag > behind) & (mag >= ahead) & (mag > 0)
    return np.where(keep, mag, 0.0)


def detect_edges(img: np.ndarray, low: float = 0.70, high: float = 0.90,
                 sigma: float = 0.0, region: np.ndarray | None = None,
                 min_magnitude: float = 0.0) -> np.ndarray:
    """Thin edge map: Sobel gradient, non-maximum suppression, hysteresis.

    Hysteresis thresholds are the ``low`` / ``high`` quantiles of the nonzero
    suppressed magnitudes, which keeps the detector exposure invariant.
    ``sigma > 0`` smooths the image with a Gaussian first. With ``region``
    only pixels inside it can be edges and only they set the quantiles.
    Responses at or below ``min_magnitude`` are never edges whatever the
    quantiles say, so a flat noisy patch yields nothing.
    """
    if not 0.0 <= low < high <= 1.0:
        raise ValueError("need 0 <= low < high <= 1")
    f = np.asarray(img, dtype=np.float64)
    if sigma > 0:
        f = ndi.gaussian_filter(f, sigma, mode="nearest")
    gx = ndi.sobel(f, axis=1, mode="nearest")
    gy = ndi.sobel(f, axis=0, mode="nearest")
    mag = np.hypot(gx, gy)
    thin = _nms(mag, gx, gy)
    if region is not None:
        thin[~np.asarray(region, dtype=bool)] = 0.0
    values = thin[thin > 0]
    if values.size == 0:
        return np.zeros(f.shape, dtype=bool)
    lo_t, hi_t = np.quantile(values, [low, high])
    weak = (thin >= lo_t) & (thin > min_magnitude)
    strong = weak & (thin >= hi_t)
    labels, n = ndi.label(weak, structure=_STRUCTURE[8])
    if n == 0:
        return np.zeros(f.shape, dtype=bool)
    keep = np.zeros(n + 1, dtype=bool)
    keep[np.unique(labels[strong])] = True
    keep[0] = False
    return keep[labels]
