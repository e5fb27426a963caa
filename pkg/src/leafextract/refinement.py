"""Refine an extracted leaf with its venation and its polar outline.

Vein refinement looks for a midrib (the strongest straight line inside the
leaf) and its branches. Depending on leaf symmetry and where the branches
sit, it either accepts the leaf or grows the leaf marker along the midrib
and branches and segments again.

Outline refinement samples the contour in polar form around the midrib
center, finds angular spans where the radius varies unusually fast and
replaces them with a least-squares cubic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np
from scipy import ndimage as ndi

from .errors import NoVeinFoundError
from .background_marker import excess_green
from .imagecore import as_rgb, connected_components, detect_edges, dilate, disk, erode, to_grayscale

__all__ = [
    "VeinLine",
    "VeinParams",
    "ContourParams",
    "PolarContour",
    "CubicFit",
    "AnomalousSpan",
    "VeinDecision",
    "region_edges",
    "hough_accumulator",
    "hough_lines",
    "line_angle_difference",
    "detect_primary_vein",
    "detect_secondary_veins",
    "reflect_mask",
    "symmetry_score",
    "principal_axis",
    "decide_vein_case",
    "refine_with_veins",
    "contour_to_polar",
    "detect_anomalous_segments",
    "fit_cubic",
    "repair_contour",
    "PolarRepair",
    "polar_repair",
    "refine_contour",
]


@dataclass(frozen=True)
class VeinLine:
    """A line in normal form ``x cos(theta) + y sin(theta) = rho``.

    ``theta`` is in radians within [0, pi); ``span`` holds the two extreme
    supporting edge pixels as ``((x0, y0), (x1, y1))``.
    """

    rho: float
    theta: float
    strength: int
    span: tuple = ((0.0, 0.0), (0.0, 0.0))

    @property
    def direction(self) -> np.ndarray:
        return np.array([-math.sin(self.theta), math.cos(self.theta)])

    @property
    def normal(self) -> np.ndarray:
        return np.array([math.cos(self.theta), math.sin(self.theta)])

    @property
    def center(self) -> np.ndarray:
        (x0, y0), (x1, y1) = self.span
        return np.array([(x0 + x1) / 2.0, (y0 + y1) / 2.0])

    @property
    def length(self) -> float:
        (x0, y0), (x1, y1) = self.span
        return math.hypot(x1 - x0, y1 - y0)

    def signed_distance(self, x, y):
        return np.asarray(x) * math.cos(self.theta) + np.asarray(y) * math.sin(self.theta) - self.rho


@dataclass(frozen=True)
class VeinParams:
    edge_low: float = 0.70
    edge_high: float = 0.90
    edge_sigma: float = 1.0
    edge_min_magnitude: float = 10.0
    interior_radius: int = 2
    primary_min_votes: int = 40
    secondary_min_votes: int = 15
    max_secondary: int = 12
    secondary_angle_min: float = 30.0
    secondary_angle_max: float = 150.0
    symmetry_threshold: float = 0.70
    collinear_rho: float = 1.0
    collinear_theta: float = 2.0
    extension_gap: float = 5.0
    marker_radius: int = 2
    boundary_candidates: int = 3
    boundary_distance: float = 3.0
    max_mirror_off_leaf: float = 0.10

    def __post_init__(self):
        if not 0.0 <= self.edge_low < self.edge_high <= 1.0:
            raise ValueError("need 0 <= edge_low < edge_high <= 1")
        if self.primary_min_votes < 1 or self.secondary_min_votes < 1:
            raise ValueError("vote thresholds must be >= 1")
        if not 0.0 <= self.secondary_angle_min <= self.secondary_angle_max <= 180.0:
            raise ValueError("secondary angle range must lie in [0, 180]")
        if not 0.0 <= self.symmetry_threshold <= 1.0:
            raise ValueError("symmetry_threshold must lie in [0, 1]")
        if not 0.0 <= self.max_mirror_off_leaf <= 1.0:
            raise ValueError("max_mirror_off_leaf must lie in [0, 1]")
        for name in ("edge_sigma", "edge_min_magnitude", "collinear_rho", "collinear_theta", "extension_gap",
                     "boundary_distance", "interior_radius", "marker_radius",
                     "boundary_candidates", "max_secondary"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")


@dataclass(frozen=True)
class ContourParams:
    window: int = 15
    k: float = 2.5
    min_run: int = 3
    merge_gap: int = 3
    context: int = 20
    min_deviation: float = 2.0
    pad: int = 60

    def __post_init__(self):
        if self.window < 3 or self.window % 2 == 0:
            raise ValueError("window must be odd and >= 3")
        if self.k <= 0:
            raise ValueError("k must be positive")
        for name in ("min_run", "merge_gap", "context", "min_deviation", "pad"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")


# ---------------------------------------------------------------------------
# Hough transform
# ---------------------------------------------------------------------------

def region_edges(gray: np.ndarray, region: np.ndarray, params: VeinParams) -> np.ndarray:
    """Thin edges inside ``region``; hysteresis quantiles use region pixels only."""
    return detect_edges(gray, params.edge_low, params.edge_high, params.edge_sigma,
                        region=region, min_magnitude=params.edge_min_magnitude)


def hough_accumulator(edges: np.ndarray, theta_step_deg: float = 1.0):
    """Vote in (theta, rho) space; returns ``(acc, thetas, rho_offset)``.

    ``acc[i, j]`` counts edge pixels with ``round(x cos t_i + y sin t_i) ==
    j - rho_offset``.
    """
    edges = np.asarray(edges, dtype=bool)
    h, w = edges.shape
    thetas = np.deg2rad(np.arange(0.0, 180.0, theta_step_deg))
    rho_off = int(math.ceil(math.hypot(h, w))) + 1
    n_rho = 2 * rho_off + 1
    ys, xs = np.nonzero(edges)
    acc = np.zeros((len(thetas), n_rho), dtype=np.int64)
    if xs.size == 0:
        return acc, thetas, rho_off
    cos_t, sin_t = np.cos(thetas), np.sin(thetas)
    for i0 in range(0, len(thetas), 30):
        sl = slice(i0, i0 + 30)
        rho = np.floor(xs[:, None] * cos_t[None, sl] + ys[:, None] * sin_t[None, sl] + 0.5).astype(np.int64)
        rows = np.arange(i0, min(i0 + 30, len(thetas)))[None, :]
        flat = (rows * n_rho + rho + rho_off).ravel()
        acc.ravel()[:] += np.bincount(flat, minlength=acc.size)[: acc.size]
    return acc, thetas, rho_off


def _span(xs, ys, rho, theta, tol):
    d = xs * math.cos(theta) + ys * math.sin(theta) - rho
    sel = np.abs(d) <= tol
    if not sel.any():
        return None
    px, py = xs[sel], ys[sel]
    t = -px * math.sin(theta) + py * math.cos(theta)
    i0, i1 = int(np.argmin(t)), int(np.argmax(t))
    return (float(px[i0]), float(py[i0])), (float(px[i1]), float(py[i1]))


def _refine_line(xs, ys, rho, theta, tol, max_turn):
    """Total least-squares line through the pixels within ``tol`` of a peak.

    Returns ``(rho, theta)`` with theta in [0, pi); the peak itself is kept
    when the fit turns by more than ``max_turn`` radians.
    """
    sel = np.abs(xs * math.cos(theta) + ys * math.sin(theta) - rho) <= tol
    if np.count_nonzero(sel) < 2:
        return rho, theta
    px, py = xs[sel], ys[sel]
    mx, my = px.mean(), py.mean()
    cov = np.cov(np.vstack([px - mx, py - my]))
    vals, vecs = np.linalg.eigh(cov)
    nx, ny = vecs[:, 0]
    t = math.atan2(ny, nx) % math.pi
    # keep the sign convention of the peak so rho stays comparable
    turn = abs(t - theta)
    turn = min(turn, math.pi - turn)
    if turn > max_turn:
        return rho, theta
    r = mx * math.cos(t) + my * math.sin(t)
    if t >= math.pi - 1e-12:
        t, r = 0.0, -r
    return float(r), float(t)


def _same_line(rho, theta, other: VeinLine, rho_tol, theta_tol) -> bool:
    dt = abs(theta - other.theta)
    if dt <= theta_tol:
        return abs(rho - other.rho) <= rho_tol
    if math.pi - dt <= theta_tol:
        return abs(rho + other.rho) <= rho_tol
    return False


def hough_lines(edges: np.ndarray, min_votes: int = 20, theta_step_deg: float = 1.0,
                max_lines: int | None = None, inlier_tol: float = 1.5) -> list[VeinLine]:
    """Accumulator peaks with at least ``min_votes``, strongest first.

    Peaks are 3x3 local maxima of the accumulator; of several equal maxima
    in one neighborhood only the first found is kept. Each peak is then
    refined by a total least-squares fit to the edge pixels within
    ``inlier_tol`` of it, which removes the accumulator quantization;
    a refined line repeating an earlier one is dropped.
    """
    acc, thetas, rho_off = hough_accumulator(edges, theta_step_deg)
    if acc.max(initial=0) < max(min_votes, 1):
        return []
    local = ndi.maximum_filter(acc, size=3, mode="constant", cval=0)
    cand = np.argwhere((acc == local) & (acc >= max(min_votes, 1)))
    votes = acc[cand[:, 0], cand[:, 1]]
    order = np.lexsort((cand[:, 1], cand[:, 0], -votes))
    step = math.radians(theta_step_deg)
    taken = np.zeros_like(acc, dtype=bool)
    ys, xs = np.nonzero(edges)
    xs = xs.astype(np.float64)
    ys = ys.astype(np.float64)
    lines = []
    for k in order:
        ti, ri = cand[k]
        if taken[max(ti - 1, 0):ti + 2, max(ri - 1, 0):ri + 2].any():
            continue
        taken[ti, ri] = True
        rho, theta = _refine_line(xs, ys, float(ri - rho_off), float(thetas[ti]), inlier_tol,
                                  2.0 * step)
        if any(_same_line(rho, theta, ln, inlier_tol, step) for ln in lines):
            continue
        span = _span(xs, ys, rho, theta, inlier_tol)
        if span is None:
            continue
        lines.append(VeinLine(rho, theta, int(acc[ti, ri]), span))
        if max_lines is not None and len(lines) >= max_lines:
            break
    return lines


def line_angle_difference(a: VeinLine, b: VeinLine) -> float:
    """Angle between two lines in degrees, modulo 180."""
    return math.degrees(abs(a.theta - b.theta)) % 180.0


# ---------------------------------------------------------------------------
# veins
# ---------------------------------------------------------------------------

def _interior(leaf: np.ndarray, radius: int) -> np.ndarray:
    return erode(np.asarray(leaf, dtype=bool), disk(radius)) if radius > 0 else np.asarray(leaf, dtype=bool)


def _inside(mask: np.ndarray, pt) -> bool:
    x, y = int(round(pt[0])), int(round(pt[1]))
    h, w = mask.shape
    return 0 <= y < h and 0 <= x < w and bool(mask[y, x])


def detect_primary_vein(leaf: np.ndarray, gray: np.ndarray, params: VeinParams = VeinParams(),
                        min_votes: int | None = None) -> VeinLine:
    """Strongest line of the leaf-interior edge map whose support lies in the leaf."""
    leaf = np.asarray(leaf, dtype=bool)
    if not leaf.any():
        raise ValueError("empty leaf mask")
    interior = _interior(leaf, params.interior_radius)
    edges = region_edges(gray, interior, params)
    votes = params.primary_min_votes if min_votes is None else min_votes
    for line in hough_lines(edges, votes, max_lines=10):
        if _inside(leaf, line.span[0]) and _inside(leaf, line.span[1]):
            return line
    raise NoVeinFoundError("no vein found")


def _branch_lines(edges, primary: VeinLine, params: VeinParams) -> list[VeinLine]:
    out = []
    for line in hough_lines(edges, params.secondary_min_votes, max_lines=4 * params.max_secondary):
        diff = line_angle_difference(line, primary)
        if params.secondary_angle_min <= diff <= params.secondary_angle_max:
            out.append(line)
            if len(out) >= params.max_secondary:
                break
    return out


def detect_secondary_veins(leaf: np.ndarray, gray: np.ndarray, primary: VeinLine,
                           params: VeinParams = VeinParams()) -> list[VeinLine]:
    """Interior lines at 30-150 degrees to the primary whose support meets the leaf."""
    leaf = np.asarray(leaf, dtype=bool)
    interior = _interior(leaf, params.interior_radius)
    edges = region_edges(gray, interior, params)
    return [ln for ln in _branch_lines(edges, primary, params)
            if _inside(leaf, ln.span[0]) or _inside(leaf, ln.span[1]) or _inside(leaf, ln.center)]


def reflect_mask(mask: np.ndarray, axis: VeinLine, shape: tuple[int, int] | None = None,
                 origin: tuple[int, int] = (0, 0)) -> np.ndarray:
    """Mirror ``mask`` across ``axis`` onto a canvas of ``shape``.

    ``origin`` is the (row, col) of the canvas's top-left pixel in image
    coordinates, so the canvas may extend beyond the image.
    """
    mask = np.asarray(mask, dtype=bool)
    h, w = mask.shape
    if shape is None:
        shape = mask.shape
    r0, c0 = origin
    yy, xx = np.mgrid[r0:r0 + shape[0], c0:c0 + shape[1]].astype(np.float64)
    d = axis.signed_distance(xx, yy)
    nx, ny = axis.normal
    sx = np.floor(xx - 2.0 * d * nx + 0.5).astype(np.int64)
    sy = np.floor(yy - 2.0 * d * ny + 0.5).astype(np.int64)
    ok = (sx >= 0) & (sx < w) & (sy >= 0) & (sy < h)
    out = np.zeros(shape, dtype=bool)
    out[ok] = mask[sy[ok], sx[ok]]
    return out


def symmetry_score(leaf: np.ndarray, axis: VeinLine) -> float:
    """Intersection over union of the leaf and its mirror image across ``axis``."""
    leaf = np.asarray(leaf, dtype=bool)
    if not leaf.any():
        raise ValueError("empty leaf mask")
    ys, xs = np.nonzero(leaf)
    d = axis.signed_distance(xs, ys)
    nx, ny = axis.normal
    mx, my = xs - 2 * d * nx, ys - 2 * d * ny
    r0 = int(math.floor(min(ys.min(), my.min()))) - 1
    r1 = int(math.ceil(max(ys.max(), my.max()))) + 2
    c0 = int(math.floor(min(xs.min(), mx.min()))) - 1
    c1 = int(math.ceil(max(xs.max(), mx.max()))) + 2
    shape = (r1 - r0, c1 - c0)
    canvas = np.zeros(shape, dtype=bool)
    h, w = leaf.shape
    ir0, ic0 = max(r0, 0), max(c0, 0)
    ir1, ic1 = min(r1, h), min(c1, w)
    canvas[ir0 - r0:ir1 - r0, ic0 - c0:ic1 - c0] = leaf[ir0:ir1, ic0:ic1]
    mirrored = reflect_mask(leaf, axis, shape, (r0, c0))
    union = np.count_nonzero(canvas | mirrored)
    return float(np.count_nonzero(canvas & mirrored) / union) if union else 0.0


def principal_axis(mask: np.ndarray) -> VeinLine:
    """Major axis of a region through its centroid, as a stand-in midrib."""
    ys, xs = np.nonzero(np.asarray(mask, dtype=bool))
    if xs.size == 0:
        raise ValueError("empty mask")
    cx, cy = xs.mean(), ys.mean()
    cov = np.cov(np.vstack([xs - cx, ys - cy])) if xs.size > 1 else np.eye(2)
    vals, vecs = np.linalg.eigh(np.atleast_2d(cov))
    dx, dy = vecs[:, int(np.argmax(vals))]
    theta = (math.atan2(dy, dx) + math.pi / 2.0) % math.pi
    rho = cx * math.cos(theta) + cy * math.sin(theta)
    t = -(xs - cx) * math.sin(theta) + (ys - cy) * math.cos(theta)
    a = (cx + t.min() * -math.sin(theta), cy + t.min() * math.cos(theta))
    b = (cx + t.max() * -math.sin(theta), cy + t.max() * math.cos(theta))
    return VeinLine(rho, theta, 0, (a, b))


def _rasterize_segment(p0, p1, shape) -> np.ndarray:
    out = np.zeros(shape, dtype=bool)
    n = int(math.ceil(math.hypot(p1[0] - p0[0], p1[1] - p0[1]) * 2)) + 1
    xs = np.floor(np.linspace(p0[0], p1[0], n) + 0.5).astype(np.int64)
    ys = np.floor(np.linspace(p0[1], p1[1], n) + 0.5).astype(np.int64)
    ok = (xs >= 0) & (xs < shape[1]) & (ys >= 0) & (ys < shape[0])
    out[ys[ok], xs[ok]] = True
    return out


def _collinear(a: VeinLine, b: VeinLine, params: VeinParams) -> bool:
    dt = math.degrees(abs(a.theta - b.theta))
    if dt <= params.collinear_theta:
        return abs(a.rho - b.rho) <= params.collinear_rho
    if 180.0 - dt <= params.collinear_theta:
        return abs(a.rho + b.rho) <= params.collinear_rho
    return False


def _extend_along(line: VeinLine, edges: np.ndarray, params: VeinParams):
    """Grow ``line``'s span along collinear Hough lines of ``edges``.

    Support pixels of every line within the collinearity tolerance are
    projected on ``line``; the span grows outward across them and stops at
    the first gap longer than ``extension_gap`` pixels. Returns the
    extended ``(p0, p1)``.
    """
    ys, xs = np.nonzero(edges)
    if xs.size == 0:
        return line.span
    near = np.zeros(xs.size, dtype=bool)
    for ln in hough_lines(edges, params.secondary_min_votes, max_lines=50):
        if _collinear(ln, line, params):
            near |= np.abs(ln.signed_distance(xs, ys)) <= 1.5
    u = line.direction
    c = line.center
    t_all = np.sort((xs[near] - c[0]) * u[0] + (ys[near] - c[1]) * u[1])
    half = line.length / 2.0
    lo, hi = -half, half
    for t in t_all[t_all > hi]:
        if t - hi > params.extension_gap:
            break
        hi = t
    for t in t_all[t_all < lo][::-1]:
        if lo - t > params.extension_gap:
            break
        lo = t
    foot = c - line.signed_distance(c[0], c[1]) * line.normal
    return tuple(foot + lo * u), tuple(foot + hi * u)


@dataclass
class VeinDecision:
    """Outcome of the vein analysis of one extracted leaf.

    ``case`` is ``"complete"``, ``"extend"`` (symmetric but no branches),
    ``"flip"`` (midrib recovered at the boundary) or ``"none"``.
    """

    case: str
    primary: VeinLine | None = None
    secondaries: list = field(default_factory=list)
    additions: np.ndarray | None = None
    symmetry: float = float("nan")


def _sides_covered(primary: VeinLine, lines: list[VeinLine]) -> bool:
    sides = {int(np.sign(primary.signed_distance(*ln.center))) for ln in lines}
    return 1 in sides and -1 in sides


def decide_vein_case(initial: np.ndarray, img: np.ndarray, bg: np.ndarray,
                     params: VeinParams = VeinParams()) -> VeinDecision:
    """Classify the extracted leaf by its veins and compute marker additions.

    Additions and mirrored halves are restricted to vegetation: pixels
    outside the background marker with positive excess green.
    """
    initial = np.asarray(initial, dtype=bool)
    bg = np.asarray(bg, dtype=bool)
    rgb = as_rgb(img)
    gray = to_grayscale(rgb)
    try:
        primary = detect_primary_vein(initial, gray, params)
    except NoVeinFoundError:
        return VeinDecision("none")
    secondaries = detect_secondary_veins(initial, gray, primary, params)
    sym = symmetry_score(initial, primary)
    shape = initial.shape
    search = ~bg & (excess_green(rgb) > 0)
    full_edges = region_edges(gray, search, params)

    if sym >= params.symmetry_threshold:
        if secondaries and _sides_covered(primary, secondaries):
            return VeinDecision("complete", primary, secondaries, None, sym)
        p0, p1 = _extend_along(primary, full_edges, params)
        add = dilate(_rasterize_segment(p0, p1, shape), disk(params.marker_radius)) & search
        if not (add & ~initial).any():
            return VeinDecision("none", primary, secondaries, None, sym)
        return VeinDecision("extend", primary, secondaries, add, sym)

    # the inside line is likely a branch: look for the midrib on the boundary
    boundary = initial & ~erode(initial, disk(1))
    near_boundary = ndi.distance_transform_edt(~boundary) <= params.boundary_distance
    near_edges = full_edges & dilate(initial, disk(int(math.ceil(params.boundary_distance))))
    ys, xs = np.nonzero(near_edges)
    tried = 0
    for cand in hough_lines(near_edges, params.primary_min_votes, max_lines=30):
        if tried >= params.boundary_candidates:
            break
        on_line = np.abs(cand.signed_distance(xs, ys)) <= 1.5
        if not near_boundary[ys[on_line], xs[on_line]].any():
            continue
        diff = line_angle_difference(cand, primary)
        if not params.secondary_angle_min <= diff <= params.secondary_angle_max:
            continue
        tried += 1
        mirrored = reflect_mask(initial, cand)
        fresh = mirrored & ~initial
        if not fresh.any() or np.count_nonzero(fresh & ~search) > params.max_mirror_off_leaf * np.count_nonzero(fresh):
            continue
        other = fresh & search
        branch_edges = full_edges & erode(other, disk(params.interior_radius))
        branches = _branch_lines(branch_edges, cand, params)
        if not branches:
            continue
        p0, p1 = _extend_along(cand, full_edges, params)
        add = _rasterize_segment(p0, p1, shape)
        for ln in branches:
            add |= _rasterize_segment(ln.span[0], ln.span[1], shape)
        add = dilate(add, disk(params.marker_radius)) & search
        return VeinDecision("flip", cand, branches, add, symmetry_score(initial | other, cand))
    return VeinDecision("none", primary, secondaries, None, sym)


def refine_with_veins(initial: np.ndarray, img: np.ndarray, leaf_marker: np.ndarray,
                      bg: np.ndarray, segment: Callable[[np.ndarray, np.ndarray], np.ndarray],
                      params: VeinParams = VeinParams()) -> tuple[np.ndarray, VeinDecision]:
    """Apply one round of vein-based marker update.

    ``segment(leaf_marker, bg_marker)`` re-runs the chosen segmenter. The
    leaf marker only ever gains pixels; the input is returned unchanged
    when no vein rule fires.
    """
    decision = decide_vein_case(initial, img, bg, params)
    if decision.additions is None:
        return np.asarray(initial, dtype=bool).copy(), decision
    marker = np.asarray(leaf_marker, dtype=bool) | (decision.additions & ~np.asarray(bg, dtype=bool))
    return segment(marker, bg), decision


# ---------------------------------------------------------------------------
# polar outline
# ---------------------------------------------------------------------------

@dataclass
class PolarContour:
    """Outline samples on one side of the midrib.

    ``theta`` (radians) increases strictly; ``r`` is in pixels from
    ``origin`` = (x, y).
    """

    origin: tuple
    theta: np.ndarray
    r: np.ndarray
    half: int

    def __len__(self):
        return len(self.theta)


def _boundary_radii(leaf: np.ndarray, origin, phi: float, n_bins: int) -> np.ndarray:
    """Farthest boundary-pixel extent in each of ``n_bins`` equal sectors.

    The extent of a pixel is its center distance plus half a pixel, so a
    digital disc of radius R reads as R to within half a pixel. Sector ``k`` is centered on angle ``phi + k * step`` with half-width
    ``step / 2``. Empty sectors are filled by linear interpolation around
    the circle.
    """
    inner = ndi.binary_erosion(leaf, structure=ndi.generate_binary_structure(2, 1), border_value=0)
    ys, xs = np.nonzero(leaf & ~inner)
    x0, y0 = origin
    dx, dy = xs - x0, ys - y0
    step = 2 * math.pi / n_bins
    offset = (np.arctan2(dy, dx) - phi) % (2 * math.pi)
    k = np.floor(offset / step + 0.5).astype(np.int64) % n_bins
    r = np.full(n_bins, -1.0)
    np.maximum.at(r, k, np.hypot(dx, dy) + 0.5)
    have = np.flatnonzero(r >= 0)
    if have.size == 0:
        return np.zeros(n_bins)
    if have.size < n_bins:
        pos = np.arange(n_bins)
        xp = np.r_[have - n_bins, have, have + n_bins]
        fp = np.r_[r[have], r[have], r[have]]
        r = np.interp(pos, xp, fp)
    return r


def contour_to_polar(leaf: np.ndarray, primary: VeinLine,
                     step_deg: float = 1.0) -> tuple[PolarContour, PolarContour]:
    """Polar samples of the leaf outline around the midrib center.

    Each sample is the outer extent of the farthest boundary pixel within
    half a step of its angle. The first half holds the angles within 180 degrees
    counter-clockwise (in image coordinates) of the midrib direction, the
    second half the rest.
    """
    leaf = np.asarray(leaf, dtype=bool)
    origin = tuple(float(v) for v in primary.center)
    if not _inside(leaf, origin):
        raise ValueError("origin outside region")
    n_bins = int(round(360.0 / step_deg))
    phi = primary.theta + math.pi / 2.0
    offsets = np.arange(n_bins) * (2 * math.pi / n_bins)
    angles = phi + offsets
    r = _boundary_radii(leaf, origin, phi, n_bins)
    first = offsets < math.pi - 1e-9
    halves = (
        PolarContour(origin, angles[first], r[first], 0),
        PolarContour(origin, angles[~first], r[~first], 1),
    )
    return halves


class AnomalousSpan(NamedTuple):
    """Inclusive sample-index range of an anomalous stretch of a half."""

    first: int
    last: int


def _rolling_std(r: np.ndarray, window: int) -> np.ndarray:
    """Centered windowed std of ``r`` about the window's least-squares parabola."""
    half = window // 2
    n = len(r)
    out = np.empty(n)
    for i in range(n):
        lo, hi = max(0, i - half), min(n, i + half + 1)
        x = np.arange(lo, hi, dtype=np.float64) - i
        y = r[lo:hi]
        deg = min(2, len(y) - 1)
        v = np.vander(x, deg + 1)
        coef, *_ = np.linalg.lstsq(v, y, rcond=None)
        out[i] = np.sqrt(np.mean((y - v @ coef) ** 2))
    return out


def _runs(flags: np.ndarray) -> list[list[int]]:
    runs = []
    i = 0
    n = len(flags)
    while i < n:
        if flags[i]:
            j = i
            while j + 1 < n and flags[j + 1]:
                j += 1
            runs.append([i, j])
            i = j + 1
        else:
            i += 1
    return runs


def _merge(runs, gap):
    out = []
    for run in runs:
        if out and run[0] - out[-1][1] - 1 <= gap:
            out[-1][1] = run[1]
        else:
            out.append(list(run))
    return out


def _trim(theta, r, idx, inl, params: ContourParams):
    for _ in range(10):
        fit = fit_cubic(np.column_stack([theta[idx[inl]], r[idx[inl]]]))
        res = np.abs(r[idx] - fit(theta[idx]))
        # robust scale: median absolute residual rescaled to a Gaussian sigma
        tol = max(params.k * 1.4826 * float(np.median(res[inl])), params.min_deviation)
        new = res <= tol
        if np.array_equal(new, inl) or np.unique(theta[idx[new]]).size < 4:
            break
        inl = new
    return fit, tol


def _trimmed_fit(theta, r, zone, usable, params: ContourParams):
    """Cubic for the samples around ``zone``, robust to the defect itself.

    Trimmed fits are started from the usable samples outside the zone, from
    all usable samples and from all samples; the one agreeing with most
    samples to within twice ``min_deviation`` wins. Returns ``(fit, tol)`` with ``tol`` the
    winner's final inlier tolerance.
    """
    a, b = zone
    n = len(r)
    idx = np.arange(max(0, a - params.context), min(n, b + 1 + params.context))
    outside = (idx < a) | (idx > b)
    starts = [usable[idx] & outside, usable[idx], np.ones(idx.size, dtype=bool)]
    best = None
    for inl in starts:
        if np.unique(theta[idx[inl]]).size < 4:
            continue
        fit, tol = _trim(theta, r, idx, inl, params)
        score = int(np.count_nonzero(np.abs(r[idx] - fit(theta[idx])) <= 2 * params.min_deviation))
        if best is None or score > best[0]:
            best = (score, fit, tol)
    if best is None:
        raise ValueError("underdetermined")
    return best[1], best[2]


def detect_anomalous_segments(half: PolarContour, params: ContourParams = ContourParams()) -> list[AnomalousSpan]:
    """Find stretches of the polar outline that vary unusually fast.

    A sample is flagged when the standard deviation of radii in the
    ``window`` centered on it exceeds ``k`` times the median of those
    deviations. Flagged runs shorter than ``min_run`` are dropped and runs
    within ``merge_gap`` samples are merged; zones closer than one window
    are bridged, since a plateau wider than the window hides between its
    two flanks. Inside each zone the spans reported are the stretches whose
    radius departs from a cubic fitted, with outlier trimming, to the
    unflagged samples around the zone.
    """
    r = np.asarray(half.r, dtype=np.float64)
    theta = np.asarray(half.theta, dtype=np.float64)
    n = len(r)
    if n < 2 * params.window:
        return []
    s = _rolling_std(r, params.window)
    tau = max(params.k * float(np.median(s)), 1e-9)
    runs = [run for run in _runs(s > tau) if run[1] - run[0] + 1 >= params.min_run]
    zones = _merge(_merge(runs, params.merge_gap), params.window - 1)
    usable = s <= tau
    spans = []
    for a, b in zones:
        try:
            fit, tol = _trimmed_fit(theta, r, (a, b), usable, params)
        except ValueError:
            continue
        dev = np.abs(r[a:b + 1] - fit(theta[a:b + 1]))
        for lo, hi in _merge(_runs(dev > tol), params.merge_gap):
            if hi - lo + 1 >= params.min_run:
                spans.append(AnomalousSpan(a + lo, a + hi))
    return spans


@dataclass(frozen=True)
class CubicFit:
    """``y = a x^3 + b x^2 + c x + d`` with the RMS residual of the fit."""

    a: float
    b: float
    c: float
    d: float
    rms: float

    @property
    def coefficients(self) -> tuple[float, float, float, float]:
        return self.a, self.b, self.c, self.d

    def __call__(self, x):
        x = np.asarray(x, dtype=np.float64)
        return ((self.a * x + self.b) * x + self.c) * x + self.d


def fit_cubic(points) -> CubicFit:
    """Least-squares cubic through ``(x, y)`` points.

    The normal equations are solved on x standardized to zero mean and unit
    variance; the coefficients are mapped back to the original x.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError("points must be an (N, 2) array")
    x, y = pts[:, 0], pts[:, 1]
    if np.unique(x).size < 4:
        raise ValueError("underdetermined: need at least 4 distinct x")
    m = x.mean()
    s = x.std()
    u = (x - m) / s
    v = np.vander(u, 4, increasing=True)
    coef_u = np.linalg.solve(v.T @ v, v.T @ y)
    # y = sum_k c_k ((x - m) / s)^k, expanded in powers of x
    poly = np.zeros(4)
    for k, ck in enumerate(coef_u):
        term = np.poly1d([1.0 / s, -m / s]) ** k
        padded = np.zeros(4)
        padded[4 - len(term.coeffs):] = term.coeffs
        poly += ck * padded
    resid = y - v @ coef_u
    rms = float(np.sqrt(np.mean(resid ** 2)))
    a, b, c, d = (float(p) for p in poly)
    return CubicFit(a, b, c, d, rms)


def _span_fits(half: PolarContour, spans, params: ContourParams) -> list[tuple[AnomalousSpan, CubicFit]]:
    """Cubic fit for each span from the unflagged samples within ``context`` of it."""
    theta = np.asarray(half.theta, dtype=np.float64)
    r = np.asarray(half.r, dtype=np.float64)
    usable = np.ones(len(r), dtype=bool)
    for sp in spans:
        usable[sp.first:sp.last + 1] = False
    out = []
    n = len(r)
    for sp in spans:
        lo, hi = max(0, sp.first - params.context), min(n, sp.last + 1 + params.context)
        idx = np.arange(lo, hi)[usable[lo:hi]]
        try:
            fit = fit_cubic(np.column_stack([theta[idx], r[idx]]))
        except ValueError:
            continue
        out.append((sp, fit))
    return out


def repair_contour(leaf: np.ndarray, halves, anomalies, params: ContourParams = ContourParams()) -> np.ndarray:
    """Replace anomalous outline spans with a local cubic fit.

    Within the angular sector of each span the leaf becomes the set of
    pixels no farther from the origin than the fitted radius (protrusions
    are cut, notches filled); the mask is untouched elsewhere. The largest
    4-connected component is returned. A span whose fit fails is left as is.
    """
    leaf = np.asarray(leaf, dtype=bool)
    out = leaf.copy()
    h, w = leaf.shape
    yy, xx = np.mgrid[0:h, 0:w]
    changed = False
    for half, spans in zip(halves, anomalies):
        if not spans:
            continue
        theta = np.asarray(half.theta)
        x0, y0 = half.origin
        ang = np.arctan2(yy - y0, xx - x0)
        rad = np.hypot(xx - x0, yy - y0)
        step = float(np.median(np.diff(theta))) if len(theta) > 1 else math.radians(1.0)
        for sp, fit in _span_fits(half, spans, params):
            t0 = theta[sp.first] - step / 2.0
            t1 = theta[sp.last] + step / 2.0
            rel = (ang - t0) % (2 * math.pi)
            sector = rel <= (t1 - t0)
            r_fit = np.maximum(fit(t0 + rel[sector]), 0.0)
            out[sector] = rad[sector] <= r_fit
            changed = True
    if not changed:
        return out
    labels, n = connected_components(out, 4)
    if n == 0:
        return leaf.copy()
    areas = np.bincount(labels.ravel(), minlength=n + 1)
    areas[0] = 0
    return labels == int(np.argmax(areas))


def _padded_halves(halves, pad: int) -> list[PolarContour]:
    """Each half extended by ``pad`` samples of the other half on both ends.

    Half 0 follows half 1 around the circle, so the samples borrowed from
    the far end get their angle shifted by a full turn.
    """
    h0, h1 = halves
    k = min(pad, len(h0), len(h1))
    turn = 2 * math.pi
    p0 = PolarContour(h0.origin,
                      np.concatenate([h1.theta[-k:] - turn, h0.theta, h1.theta[:k]]),
                      np.concatenate([h1.r[-k:], h0.r, h1.r[:k]]), 0)
    p1 = PolarContour(h1.origin,
                      np.concatenate([h0.theta[-k:], h1.theta, h0.theta[:k] + turn]),
                      np.concatenate([h0.r[-k:], h1.r, h0.r[:k]]), 1)
    return [p0, p1]


@dataclass
class PolarRepair:
    """Outcome of the polar outline repair.

    ``flags[i]`` marks the anomalous samples of ``halves[i]`` and
    ``fitted[i]`` holds the replacement radius there (the measured radius
    elsewhere).
    """

    axis: VeinLine
    halves: tuple
    flags: list
    fitted: list
    mask: np.ndarray

    def rows(self):
        """``(theta_deg, r_px, anomalous, fitted_r)`` for every sample, by half."""
        out = []
        for half, flag, fit in zip(self.halves, self.flags, self.fitted):
            for t, r, f, y in zip(half.theta, half.r, flag, fit):
                out.append((math.degrees(t), float(r), bool(f), float(y)))
        return out


def polar_repair(leaf: np.ndarray, primary: VeinLine | None = None,
                 params: ContourParams = ContourParams()) -> PolarRepair:
    """Polar outline repair around ``primary`` (or the principal axis).

    Detection runs on each half padded with samples from the other half so
    that defects straddling the midrib ends are seen whole; a defect is
    handled by the half holding its middle sample.
    """
    leaf = np.asarray(leaf, dtype=bool)
    if not leaf.any():
        raise ValueError("empty leaf mask")
    axis = primary if primary is not None else principal_axis(leaf)
    try:
        halves = contour_to_polar(leaf, axis)
    except ValueError:
        axis = principal_axis(leaf)
        halves = contour_to_polar(leaf, axis)
    padded = _padded_halves(halves, params.pad)
    k = (len(padded[0]) - len(halves[0])) // 2
    anomalies = []
    for hf, core in zip(padded, halves):
        spans = detect_anomalous_segments(hf, params)
        anomalies.append([sp for sp in spans if k <= (sp.first + sp.last) // 2 < k + len(core)])
    mask = repair_contour(leaf, padded, anomalies, params)

    flags = [np.zeros(len(hf), dtype=bool) for hf in halves]
    fitted = [np.array(hf.r, dtype=np.float64) for hf in halves]
    sizes = [len(hf) for hf in halves]
    for i, (hf, spans) in enumerate(zip(padded, anomalies)):
        for sp, fit in _span_fits(hf, spans, params):
            for j in range(sp.first, sp.last + 1):
                # map a padded index back to (owning half, core index)
                c = j - k
                owner = i
                if c < 0:
                    owner, c = 1 - i, c + sizes[1 - i]
                elif c >= sizes[i]:
                    owner, c = 1 - i, c - sizes[i]
                flags[owner][c] = True
                fitted[owner][c] = max(float(fit(hf.theta[j])), 0.0)
    return PolarRepair(axis, halves, flags, fitted, mask)


def refine_contour(leaf: np.ndarray, primary: VeinLine | None = None,
                   params: ContourParams = ContourParams()) -> np.ndarray:
    """Leaf mask after polar outline repair; see :func:`polar_repair`."""
    leaf = np.asarray(leaf, dtype=bool)
    if not leaf.any():
        return leaf.copy()
    try:
        return polar_repair(leaf, primary, params).mask
    except ValueError:
        return leaf.copy()
