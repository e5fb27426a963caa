"""Background marker from color indices, texture entropy and cleanup rules."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy import ndimage as ndi

from .imagecore import (
    as_rgb,
    connected_components,
    disk,
    erode,
    to_grayscale,
)

__all__ = [
    "BackgroundParams",
    "BackgroundParts",
    "excess_green",
    "excess_red",
    "otsu_threshold",
    "count_histogram_peaks",
    "threshold_index_difference",
    "color_rules",
    "local_entropy",
    "cleanup_marker",
    "build_background_marker",
]


@dataclass(frozen=True)
class BackgroundParams:
    white_r: int = 200
    white_g: int = 220
    white_b: int = 200
    black_level: int = 30
    entropy_window: int = 3
    entropy_threshold: float = 220.0
    cleanup_min_area: int = 100
    cleanup_distance: float = 50.0
    cleanup_erosion_radius: int = 2

    def __post_init__(self):
        for name in ("white_r", "white_g", "white_b", "black_level"):
            v = getattr(self, name)
            if not 0 <= v <= 255:
                raise ValueError(f"{name} must lie in [0, 255]")
        if self.entropy_window < 3 or self.entropy_window % 2 == 0:
            raise ValueError("entropy_window must be odd and >= 3")
        if not 0 <= self.entropy_threshold <= 255:
            raise ValueError("entropy_threshold must lie in [0, 255]")
        if self.cleanup_min_area < 0 or self.cleanup_distance < 0 or self.cleanup_erosion_radius < 0:
            raise ValueError("cleanup parameters must be non-negative")


def excess_green(img: np.ndarray) -> np.ndarray:
    """ExG = 2G - R - B per pixel, as float64 (range [-510, 510])."""
    rgb = as_rgb(img).astype(np.float64)
    return 2.0 * rgb[..., 1] - rgb[..., 0] - rgb[..., 2]


def excess_red(img: np.ndarray) -> np.ndarray:
    """ExR = 1.4R - G - B per pixel, as float64 (range [-510, 357])."""
    rgb = as_rgb(img).astype(np.float64)
    return 1.4 * rgb[..., 0] - rgb[..., 1] - rgb[..., 2]


def otsu_threshold(histogram) -> int:
    """Otsu level for a 256-bin histogram.

    Returns the smallest ``t`` maximizing the between-class variance of the
    split ``[0..t]`` vs ``[t+1..255]``. The comparison is done in exact
    integer arithmetic so ties resolve deterministically. When no split can
    make both classes nonempty (a single populated bin) that bin's level is
    returned.
    """
    hist = np.asarray(histogram)
    if hist.shape != (256,):
        raise ValueError("histogram must have 256 bins")
    if np.any(hist < 0):
        raise ValueError("histogram counts must be non-negative")
    counts = [int(c) for c in hist]
    total = sum(counts)
    if total == 0:
        raise ValueError("empty histogram")
    total_sum = sum(i * c for i, c in enumerate(counts))

    # sigma_B^2 * N^2 = (N*s0 - n0*S)^2 / (n0 * (N - n0)); compare as fractions
    best_t = None
    best_num, best_den = -1, 1
    n0 = s0 = 0
    for t in range(255):
        n0 += counts[t]
        s0 += t * counts[t]
        n1 = total - n0
        if n0 == 0 or n1 == 0:
            continue
        num = (total * s0 - n0 * total_sum) ** 2
        den = n0 * n1
        if best_t is None or num * best_den > best_num * den:
            best_t, best_num, best_den = t, num, den
    if best_t is None:
        return int(np.flatnonzero(hist)[0])
    return best_t


def count_histogram_peaks(hist, smooth: int = 5, min_fraction: float = 0.05,
                          min_separation: int = 10) -> int:
    """Count significant peaks of a 1-D histogram.

    The histogram is smoothed with a ``smooth``-bin moving average; local
    maxima lower than ``min_fraction`` of the global maximum are ignored and
    peaks closer than ``min_separation`` bins collapse onto the higher one.
    """
    h = np.convolve(np.asarray(hist, dtype=np.float64), np.ones(smooth) / smooth, mode="same")
    top = h.max()
    if top <= 0:
        return 0
    padded = np.concatenate([[-np.inf], h, [-np.inf]])
    # plateau-aware local maxima: rising into the plateau, falling out of it
    cand = []
    i = 1
    n = len(h)
    while i <= n:
        j = i
        while j < n and padded[j + 1] == padded[i]:
            j += 1
        if padded[i] > padded[i - 1] and padded[i] > padded[j + 1]:
            cand.append(((i + j) // 2 - 1, padded[i]))
        i = j + 1
    cand = [(pos, val) for pos, val in cand if val >= min_fraction * top]
    kept: list[tuple[int, float]] = []
    for pos, val in sorted(cand, key=lambda pv: -pv[1]):
        if all(abs(pos - p) >= min_separation for p, _ in kept):
            kept.append((pos, val))
    return len(kept)


def threshold_index_difference(diff: np.ndarray, max_otsu_peaks: int = 2) -> np.ndarray:
    """Vegetation-candidate mask from the ExG - ExR image.

    Values are min-max rescaled onto 256 bins. A histogram with at most
    ``max_otsu_peaks`` significant peaks is split with Otsu; otherwise the
    threshold falls back to ``mean - std`` of the raw values. Pixels above
    the threshold are vegetation candidates.
    """
    d = np.asarray(diff, dtype=np.float64)
    lo, hi = float(d.min()), float(d.max())
    if hi <= lo:
        return np.ones(d.shape, dtype=bool)
    bins = np.floor((d - lo) / (hi - lo) * 255.0 + 0.5).astype(np.intp)
    hist = np.bincount(bins.ravel(), minlength=256)
    if count_histogram_peaks(hist) <= max_otsu_peaks:
        return bins > otsu_threshold(hist)
    return d > d.mean() - d.std()


def color_rules(img: np.ndarray, params: BackgroundParams = BackgroundParams()) -> np.ndarray:
    """Background by color: blue over green, near-white, or near-black."""
    rgb = as_rgb(img).astype(np.int16)
    r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
    blue = b > g
    white = (r > params.white_r) & (g > params.white_g) & (b > params.white_b)
    lvl = params.black_level
    black = (r < lvl) & (g < lvl) & (b < lvl)
    return blue | white | black


def local_entropy(gray: np.ndarray, window: int = 3) -> np.ndarray:
    """Shannon entropy of each ``window x window`` neighborhood, scaled to 0-255.

    The raw entropy (bits) is multiplied by ``255 / log2(window**2)`` and
    rounded half up; borders are edge-replicated.
    """
    if window < 3 or window % 2 == 0:
        raise ValueError("window must be odd and >= 3")
    g = np.asarray(gray)
    h, w = g.shape
    r = window // 2
    pad = np.pad(g, r, mode="edge")
    stack = np.stack([pad[dy:dy + h, dx:dx + w]
                      for dy in range(window) for dx in range(window)], axis=-1)
    k = window * window
    # each of the k samples contributes log2(count of its own value);
    # summing over samples gives sum over bins of c * log2(c)
    log_counts = np.zeros((h, w))
    for i in range(k):
        same = (stack == stack[..., i:i + 1]).sum(axis=-1)
        log_counts += np.log2(same)
    bits = np.log2(k) - log_counts / k
    scaled = np.floor(bits * 255.0 / np.log2(k) + 0.5)
    return np.clip(scaled, 0, 255).astype(np.uint8)


def _min_distance_exceeds(labels: np.ndarray, comp: int, sl, limit: float) -> bool:
    """True if every other labeled pixel is farther than ``limit`` from ``comp``."""
    h, w = labels.shape
    m = int(np.ceil(limit)) + 1
    r0, r1 = max(sl[0].start - m, 0), min(sl[0].stop + m, h)
    c0, c1 = max(sl[1].start - m, 0), min(sl[1].stop + m, w)
    crop = labels[r0:r1, c0:c1]
    other = (crop > 0) & (crop != comp)
    if not other.any():
        return True
    dist = ndi.distance_transform_edt(~other)
    return bool(dist[crop == comp].min() > limit)


def cleanup_marker(raw: np.ndarray, params: BackgroundParams = BackgroundParams()) -> np.ndarray:
    """Clean a raw background mask.

    1. Components smaller than ``cleanup_min_area`` whose nearest other
       background component lies farther than ``cleanup_distance`` are
       dropped (likely holes in the leaf).
    2. The survivors are eroded by a disk of ``cleanup_erosion_radius``.
    3. Every image-border pixel is forced to background.
    """
    raw = np.asarray(raw, dtype=bool)
    labels, n = connected_components(raw, 8)
    keep = raw.copy()
    if n:
        areas = np.bincount(labels.ravel(), minlength=n + 1)
        small = np.flatnonzero(areas < params.cleanup_min_area)
        small = small[small > 0]
        if small.size:
            large = (labels > 0) & (areas[labels] >= params.cleanup_min_area)
            if large.any():
                near_large = ndi.distance_transform_edt(~large) <= params.cleanup_distance
            else:
                near_large = np.zeros_like(raw)
            slices = ndi.find_objects(labels)
            drop = np.zeros(n + 1, dtype=bool)
            close_to_large = np.zeros(n + 1, dtype=bool)
            close_to_large[np.unique(labels[near_large & (labels > 0)])] = True
            for comp in small:
                if close_to_large[comp]:
                    continue
                if _min_distance_exceeds(labels, comp, slices[comp - 1], params.cleanup_distance):
                    drop[comp] = True
            keep &= ~drop[labels]
    if params.cleanup_erosion_radius > 0:
        keep = erode(keep, disk(params.cleanup_erosion_radius))
    keep[0, :] = keep[-1, :] = True
    keep[:, 0] = keep[:, -1] = True
    return keep


class BackgroundParts(NamedTuple):
    """Sub-masks of the background marker, kept for debugging dumps."""

    index_background: np.ndarray
    color_background: np.ndarray
    entropy_background: np.ndarray
    marker: np.ndarray


def background_parts(img: np.ndarray, params: BackgroundParams = BackgroundParams()) -> BackgroundParts:
    """Compute every background sub-mask and the cleaned marker."""
    img = as_rgb(img)
    diff = excess_green(img) - excess_red(img)
    index_bg = ~threshold_index_difference(diff)
    color_bg = color_rules(img, params)
    ent = local_entropy(to_grayscale(img), params.entropy_window)
    entropy_bg = ent > params.entropy_threshold
    marker = cleanup_marker(index_bg | color_bg | entropy_bg, params)
    return BackgroundParts(index_bg, color_bg, entropy_bg, marker)


def build_background_marker(img: np.ndarray, params: BackgroundParams = BackgroundParams()) -> np.ndarray:
    """Background marker for an (already resized) RGB image."""
    return background_parts(img, params).marker
