"""Leaf marker: locate the front-most leaf and emit a seed region inside it.

The stages are grayscale reconstruction filtering, regional maxima imposed
as minima of the gradient, a watershed pre-pass, solidity-driven region
growing and edge-based cutting.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy import ndimage as ndi

from . import _kernels
from .background_marker import excess_green
from .errors import MarkerVanishedError, NoLeafCandidateError
from .imagecore import (
    connected_components,
    convex_hull,
    detect_edges,
    dilate,
    disk,
    erode,
    gradient_magnitude,
    hull_points,
    polygon_area,
    rgb_to_hsi,
    to_grayscale,
)

__all__ = [
    "LeafMarkerParams",
    "RegionStats",
    "LeafMarkerParts",
    "reconstruct",
    "open_by_reconstruction",
    "close_by_reconstruction",
    "regional_maxima",
    "regional_minima",
    "impose_minima",
    "solidity",
    "compute_region_stats",
    "select_and_grow",
    "edge_cut",
    "leaf_marker_parts",
    "build_leaf_marker",
]


@dataclass(frozen=True)
class LeafMarkerParams:
    reconstruction_radius: int = 5
    solidity_target: float = 0.95
    hue_tolerance: float = 20.0
    intensity_tolerance: float = 0.10
    final_erosion_radius: int = 3
    edge_low: float = 0.70
    edge_high: float = 0.90
    edge_sigma: float = 1.0

    def __post_init__(self):
        if self.hue_tolerance <= 0 or self.intensity_tolerance <= 0:
            raise ValueError("similarity tolerances must be positive")
        if not 0 < self.solidity_target <= 1:
            raise ValueError("solidity_target must lie in (0, 1]")
        if self.reconstruction_radius < 0 or self.final_erosion_radius < 0:
            raise ValueError("radii must be non-negative")


# ---------------------------------------------------------------------------
# reconstruction
# ---------------------------------------------------------------------------

def reconstruct(marker: np.ndarray, mask: np.ndarray, method: str = "dilation") -> np.ndarray:
    """Grayscale morphological reconstruction with 8-connectivity.

    ``method="dilation"`` needs ``marker <= mask`` everywhere and iterates
    geodesic dilation of the marker under the mask until stable;
    ``method="erosion"`` is the dual and needs ``marker >= mask``.
    The result has the mask's dtype.
    """
    marker = np.asarray(marker)
    mask = np.asarray(mask)
    if marker.shape != mask.shape:
        raise ValueError("marker and mask shapes differ")
    if method == "dilation":
        if np.any(marker > mask):
            raise ValueError("marker/mask ordering: marker must be <= mask for reconstruction by dilation")
        out = _kernels.reconstruct_dilation(marker.astype(np.float64), mask.astype(np.float64))
    elif method == "erosion":
        if np.any(marker < mask):
            raise ValueError("marker/mask ordering: marker must be >= mask for reconstruction by erosion")
        out = -_kernels.reconstruct_dilation(-marker.astype(np.float64), -mask.astype(np.float64))
    else:
        raise ValueError("method must be 'dilation' or 'erosion'")
    return out.astype(mask.dtype) if mask.dtype != bool else out > 0


def open_by_reconstruction(img: np.ndarray, footprint: np.ndarray) -> np.ndarray:
    """Erode, then reconstruct by dilation under the original."""
    return reconstruct(erode(img, footprint), img, "dilation")


def close_by_reconstruction(img: np.ndarray, footprint: np.ndarray) -> np.ndarray:
    """Dilate, then reconstruct by erosion above the original."""
    return reconstruct(dilate(img, footprint), img, "erosion")


# ---------------------------------------------------------------------------
# extrema
# ---------------------------------------------------------------------------

def regional_maxima(img: np.ndarray) -> np.ndarray:
    """Pixels of 8-connected plateaus that no 8-neighbor strictly exceeds."""
    return _kernels.regional_maxima(np.asarray(img, dtype=np.float64))


def regional_minima(img: np.ndarray) -> np.ndarray:
    return _kernels.regional_maxima(-np.asarray(img, dtype=np.float64))


def impose_minima(grad: np.ndarray, seeds: np.ndarray) -> np.ndarray:
    """Modify ``grad`` so the seed components are its only regional minima.

    Seeds take the global minimum of ``grad``; every other pixel starts at
    ``grad + 1`` and the result is reconstructed by erosion from the seeds.
    """
    seeds = np.asarray(seeds, dtype=bool)
    if not seeds.any():
        raise ValueError("seeds must be nonempty")
    g = np.asarray(grad, dtype=np.float64)
    low = g.min()
    high = g.max() + 1.0
    marker = np.where(seeds, low, high)
    mask = np.where(seeds, low, g + 1.0)
    return reconstruct(marker, mask, "erosion")


# ---------------------------------------------------------------------------
# region statistics
# ---------------------------------------------------------------------------

@dataclass
class RegionStats:
    label: int
    area: int
    hue: float
    intensity: float
    exg: float
    solidity: float
    adjacency: set = field(default_factory=set)
    hull: np.ndarray = field(default=None, repr=False)

    @property
    def is_green(self) -> bool:
        return self.exg > 0


def _hull_of(points: np.ndarray) -> np.ndarray:
    return convex_hull(points) if len(points) else points


def solidity(region) -> float:
    """Area over convex-hull area, the hull spanning pixel squares."""
    region = np.asarray(region, dtype=bool)
    area = int(region.sum())
    if area == 0:
        raise ValueError("empty region")
    return area / polygon_area(convex_hull(hull_points(region, corners=True)))


def _circular_mean_deg(angles: np.ndarray) -> float:
    if angles.size == 0:
        return float("nan")
    a = np.radians(angles)
    return float(np.degrees(np.arctan2(np.sin(a).mean(), np.cos(a).mean())) % 360.0)


def _hue_distance(a: float, b: float) -> float:
    if np.isnan(a) or np.isnan(b):
        return float("inf")
    d = abs(a - b) % 360.0
    return min(d, 360.0 - d)


def _adjacency(labels: np.ndarray) -> dict[int, set]:
    adj: dict[int, set] = {}
    pairs = []
    for a, b in ((labels[:, :-1], labels[:, 1:]), (labels[:-1, :], labels[1:, :])):
        sel = (a != b) & (a > 0) & (b > 0)
        pairs.append(np.column_stack([a[sel], b[sel]]))
    if pairs:
        allp = np.unique(np.sort(np.concatenate(pairs), axis=1), axis=0)
        for a, b in allp:
            adj.setdefault(int(a), set()).add(int(b))
            adj.setdefault(int(b), set()).add(int(a))
    return adj


def compute_region_stats(labels: np.ndarray, img: np.ndarray) -> list[RegionStats]:
    """Area, mean hue/intensity/ExG, solidity and 4-adjacency per region."""
    labels = np.asarray(labels)
    n = int(labels.max()) if labels.size else 0
    if n == 0:
        return []
    hsi = rgb_to_hsi(img)
    exg = excess_green(img)
    idx = np.arange(1, n + 1)
    flat = labels.ravel()
    area = np.bincount(flat, minlength=n + 1)
    inten = ndi.mean(hsi.intensity, labels, idx)
    exg_mean = ndi.mean(exg, labels, idx)
    hue_rad = np.radians(np.nan_to_num(hsi.hue))
    defined = hsi.hue_defined.astype(np.float64)
    sin_sum = np.bincount(flat, (np.sin(hue_rad) * defined).ravel(), minlength=n + 1)
    cos_sum = np.bincount(flat, (np.cos(hue_rad) * defined).ravel(), minlength=n + 1)
    n_def = np.bincount(flat, defined.ravel(), minlength=n + 1)
    adj = _adjacency(labels)
    slices = ndi.find_objects(labels)
    stats = []
    for lab in idx:
        sl = slices[lab - 1]
        if sl is None:
            continue
        sub = labels[sl] == lab
        pts = hull_points(sub, corners=True) + np.array([sl[1].start, sl[0].start])
        hull = _hull_of(pts)
        hull_area = polygon_area(hull)
        if n_def[lab] > 0:
            hue = float(np.degrees(np.arctan2(sin_sum[lab], cos_sum[lab])) % 360.0)
        else:
            hue = float("nan")
        stats.append(RegionStats(
            label=int(lab),
            area=int(area[lab]),
            hue=hue,
            intensity=float(inten[lab - 1]),
            exg=float(exg_mean[lab - 1]),
            solidity=float(area[lab] / hull_area) if hull_area > 0 else 1.0,
            adjacency=adj.get(int(lab), set()),
            hull=hull,
        ))
    return stats


def select_and_grow(stats: list[RegionStats], labels: np.ndarray,
                    params: LeafMarkerParams = LeafMarkerParams()) -> np.ndarray:
    """Grow the leaf candidate from the largest green region.

    An adjacent region joins when its mean hue and intensity are within
    tolerance of the current candidate and the merged region is strictly
    more solid. Candidates are tried largest first (label breaks ties) and
    the loop runs to a fixed point.
    """
    green = [s for s in stats if s.is_green]
    if not green:
        raise NoLeafCandidateError("no leaf candidate")
    by_label = {s.label: s for s in stats}
    seed = max(green, key=lambda s: (s.area, -s.label))
    members = {seed.label}
    area = seed.area
    hue, inten, hull = seed.hue, seed.intensity, seed.hull
    cur_solidity = seed.solidity
    # running sums for area-weighted means
    sin_h = np.sin(np.radians(hue)) * area if not np.isnan(hue) else 0.0
    cos_h = np.cos(np.radians(hue)) * area if not np.isnan(hue) else 0.0
    inten_sum = inten * area
    frontier = set(seed.adjacency)
    changed = True
    while changed:
        changed = False
        for lab in sorted(frontier - members, key=lambda l: (-by_label[l].area, l)):
            cand = by_label[lab]
            if _hue_distance(hue, cand.hue) > params.hue_tolerance:
                continue
            if abs(inten - cand.intensity) > params.intensity_tolerance:
                continue
            merged_hull = convex_hull(np.concatenate([hull, cand.hull]))
            merged_area = area + cand.area
            merged_solidity = merged_area / polygon_area(merged_hull)
            if not merged_solidity > cur_solidity:
                continue
            members.add(lab)
            area = merged_area
            hull = merged_hull
            cur_solidity = merged_solidity
            sin_h += np.sin(np.radians(cand.hue)) * cand.area
            cos_h += np.cos(np.radians(cand.hue)) * cand.area
            inten_sum += cand.intensity * cand.area
            hue = float(np.degrees(np.arctan2(sin_h, cos_h)) % 360.0)
            inten = inten_sum / area
            frontier |= cand.adjacency
            changed = True
            break
    return np.isin(labels, sorted(members))


def _largest_component(mask: np.ndarray, connectivity: int = 4) -> np.ndarray:
    labels, n = connected_components(mask, connectivity)
    if n == 0:
        return mask.copy()
    areas = np.bincount(labels.ravel(), minlength=n + 1)
    areas[0] = 0
    return labels == int(np.argmax(areas))


def edge_cut(candidate: np.ndarray, edges: np.ndarray,
             params: LeafMarkerParams = LeafMarkerParams()) -> np.ndarray:
    """Cut a low-solidity candidate along edge chains touching its boundary,
    keep the largest piece and erode it into the leaf marker.

    Raises ``MarkerVanishedError`` (carrying the un-eroded piece) when the
    final erosion removes every pixel.
    """
    candidate = np.asarray(candidate, dtype=bool)
    edges = np.asarray(edges, dtype=bool)
    if not candidate.any():
        raise MarkerVanishedError("marker vanished", fallback=candidate.copy())
    piece = candidate
    if solidity(candidate) < params.solidity_target:
        boundary = candidate & ~erode(candidate, disk(1))
        inner_edges = edges & candidate
        chains, n = connected_components(inner_edges, 8)
        if n:
            touching = np.unique(chains[boundary & (chains > 0)])
            cut = np.isin(chains, touching[touching > 0])
            remaining = candidate & ~cut
            if remaining.any():
                piece = _largest_component(remaining, 4)
    piece = _largest_component(piece, 4)
    marker = erode(piece, disk(params.final_erosion_radius))
    if not marker.any():
        raise MarkerVanishedError("marker vanished", fallback=piece)
    return marker


# ---------------------------------------------------------------------------
# composition
# ---------------------------------------------------------------------------

class LeafMarkerParts(NamedTuple):
    filtered: np.ndarray
    maxima: np.ndarray
    regions: np.ndarray
    selected: np.ndarray
    marker: np.ndarray


def leaf_marker_parts(img: np.ndarray, bg: np.ndarray,
                      params: LeafMarkerParams = LeafMarkerParams()) -> LeafMarkerParts:
    """Run every leaf-marker stage and keep the intermediates."""
    bg = np.asarray(bg, dtype=bool)
    fg = ~bg
    if not fg.any():
        raise NoLeafCandidateError("no leaf candidate")
    gray = to_grayscale(img)
    masked = np.where(fg, gray, 0).astype(np.uint8)
    se = disk(params.reconstruction_radius)
    opened = open_by_reconstruction(masked, se)
    filtered = close_by_reconstruction(opened, se)
    maxima = regional_maxima(filtered) & fg
    if not maxima.any():
        raise NoLeafCandidateError("no leaf candidate")

    seeds, _ = connected_components(maxima, 8)
    relief = impose_minima(gradient_magnitude(gray), maxima)
    regions = _kernels.flood(relief, seeds.copy(), fg, False)
    regions[bg] = 0

    stats = compute_region_stats(regions, img)
    selected = select_and_grow(stats, regions, params)
    edges = detect_edges(gray, params.edge_low, params.edge_high, params.edge_sigma)
    try:
        marker = edge_cut(selected, edges, params)
    except MarkerVanishedError as exc:
        marker = exc.fallback
    marker &= fg
    if not marker.any():
        raise NoLeafCandidateError("no leaf candidate")
    return LeafMarkerParts(filtered, maxima, regions, selected, marker)


def build_leaf_marker(img: np.ndarray, bg: np.ndarray,
                      params: LeafMarkerParams = LeafMarkerParams()) -> np.ndarray:
    """Leaf marker for an RGB image given its background marker."""
    return leaf_marker_parts(img, bg, params).marker
