"""Procedural leaf scenes with exact ground truth.

Each scene is a single target leaf (a deformed ellipse with a darker
midrib and branch veins) over soil texture with high-entropy grass
patches. ``occluded`` scenes add same-hue distractor leaves behind the
target; ``textured`` scenes add specular highlights at the margin and a
grass blade touching the leaf.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import ndimage as ndi

__all__ = ["DIFFICULTIES", "generate_synthetic_scene"]

DIFFICULTIES = ("easy", "occluded", "textured")

_SHAPE = (450, 600)


def _frame(xx, yy, cx, cy, angle):
    ca, sa = math.cos(angle), math.sin(angle)
    u = (xx - cx) * ca + (yy - cy) * sa
    v = -(xx - cx) * sa + (yy - cy) * ca
    return u, v


def _leaf_shape(xx, yy, cx, cy, a, b, angle, c2=0.0, c3=0.0):
    """Mask of an ellipse whose radius is scaled by ``1 + c2 cos 2p + c3 cos 3p``."""
    u, v = _frame(xx, yy, cx, cy, angle)
    phi = np.arctan2(v / b, u / a)
    rn = np.hypot(u / a, v / b)
    return rn <= 1.0 + c2 * np.cos(2 * phi) + c3 * np.cos(3 * phi)


def _segment_distance(xx, yy, p0, p1):
    d = np.subtract(p1, p0, dtype=np.float64)
    L2 = float(d @ d)
    t = ((xx - p0[0]) * d[0] + (yy - p0[1]) * d[1]) / L2
    t = np.clip(t, 0.0, 1.0)
    return np.hypot(xx - (p0[0] + t * d[0]), yy - (p0[1] + t * d[1])), t


def _soil(rng, shape):
    base = np.array([172.0, 126.0, 96.0]) + rng.uniform(-10, 10, 3)
    low = ndi.gaussian_filter(rng.normal(size=shape), 12)
    low /= max(np.abs(low).max(), 1e-9)
    img = base[None, None, :] * (1.0 + 0.12 * low[..., None])
    img += rng.normal(0.0, 1.5, shape + (3,))
    return img


def _grass(rng, img, xx, yy, avoid, n_patches):
    h, w = avoid.shape
    far = ndi.distance_transform_edt(~avoid) > 25
    placed = 0
    for _ in range(50):
        if placed >= n_patches:
            break
        r = rng.uniform(25, 45)
        cx, cy = rng.uniform(r, w - r), rng.uniform(r, h - r)
        blob = np.hypot((xx - cx) / r, (yy - cy) / (0.7 * r)) <= 1.0
        if not far[blob].all():
            continue
        g = rng.uniform(50, 230, blob.sum())
        img[blob, 0] = 0.45 * g + rng.uniform(0, 40, g.size)
        img[blob, 1] = g
        img[blob, 2] = 0.25 * g + rng.uniform(0, 30, g.size)
        placed += 1


def _veins(xx, yy, cx, cy, a, b, angle, leaf, rng, contrast):
    """Darkening factor (1 on lamina) for a midrib and pinnate branches."""
    u, v = _frame(xx, yy, cx, cy, angle)
    shade = np.ones(xx.shape)
    mid = (np.abs(v) <= 1.6) & (np.abs(u) <= 0.93 * a) & leaf
    shade[mid] = 1.0 - contrast
    n_branch = int(rng.integers(5, 8))
    tilt = math.radians(rng.uniform(40, 60))
    for k in range(n_branch):
        u0 = -0.65 * a + 1.25 * a * (k + 0.5) / n_branch
        for side in (-1.0, 1.0):
            du, dv = math.cos(tilt), side * math.sin(tilt)
            length = 1.2 * b
            d, _ = _segment_distance(u, v, (u0, 0.0), (u0 + length * du, length * dv))
            shade[(d <= 1.0) & leaf & ~mid] = 1.0 - 0.6 * contrast
    return shade


def generate_synthetic_scene(seed: int, difficulty: str = "easy",
                             vein_contrast: float | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Render ``(rgb, ground_truth)`` for one scene, deterministic in ``seed``.

    Parameters
    ----------
    seed : int
        Random seed; the same seed and difficulty give identical output.
    difficulty : {"easy", "occluded", "textured"}
    vein_contrast : float, optional
        Relative darkening of the midrib (branches get 60% of it). Drawn
        from [0.15, 0.25] when omitted.

    Returns
    -------
    rgb : (450, 600, 3) uint8
    truth : (450, 600) bool
        Pixels of the target leaf.
    """
    if difficulty not in DIFFICULTIES:
        raise ValueError(f"unknown difficulty {difficulty!r}")
    rng = np.random.default_rng([int(seed), DIFFICULTIES.index(difficulty)])
    h, w = _SHAPE
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    img = _soil(rng, _SHAPE)

    angle = rng.uniform(0, math.pi)
    a, b = rng.uniform(150, 200), rng.uniform(80, 105)
    ext_x = math.hypot(a * math.cos(angle), b * math.sin(angle)) * 1.1
    ext_y = math.hypot(a * math.sin(angle), b * math.cos(angle)) * 1.1
    scale = min(1.0, (w / 2 - 25) / ext_x, (h / 2 - 25) / ext_y)
    a, b = a * scale, b * scale
    ext_x, ext_y = ext_x * scale, ext_y * scale
    cx = w / 2 + rng.uniform(-1, 1) * max(0.0, w / 2 - 25 - ext_x)
    cy = h / 2 + rng.uniform(-1, 1) * max(0.0, h / 2 - 25 - ext_y)
    c2, c3 = rng.uniform(-0.04, 0.04), rng.uniform(-0.05, 0.05)
    leaf = _leaf_shape(xx, yy, cx, cy, a, b, angle, c2, c3)

    green = np.array([62.0, 130.0, 44.0]) + rng.uniform(-8, 8, 3)

    if difficulty == "occluded":
        for _ in range(2):
            phi = rng.uniform(0, 2 * math.pi)
            dist = rng.uniform(0.9, 1.2) * a
            ox, oy = cx + dist * math.cos(phi), cy + dist * math.sin(phi)
            other = _leaf_shape(xx, yy, ox, oy, 0.7 * a, 0.7 * b, rng.uniform(0, math.pi))
            img[other] = green * 0.8 + rng.normal(0.0, 1.0, (other.sum(), 3))

    _grass(rng, img, xx, yy, leaf | (img[..., 1] > img[..., 0] + 20), int(rng.integers(2, 5)))

    blade = np.zeros(_SHAPE, dtype=bool)
    if difficulty == "textured":
        # a grass blade that starts under the leaf margin and points outward
        phi = rng.uniform(0, 2 * math.pi)
        u_dir = np.array([math.cos(angle), math.sin(angle)])
        v_dir = np.array([-math.sin(angle), math.cos(angle)])
        edge = np.array([cx, cy]) + 0.9 * (a * math.cos(phi) * u_dir + b * math.sin(phi) * v_dir)
        out = edge - np.array([cx, cy])
        out /= np.linalg.norm(out)
        turn = math.radians(rng.uniform(-20, 20))
        out = np.array([out[0] * math.cos(turn) - out[1] * math.sin(turn),
                        out[0] * math.sin(turn) + out[1] * math.cos(turn)])
        length = rng.uniform(100, 150)
        tip = edge + length * out
        d, t = _segment_distance(xx, yy, edge, tip)
        blade = (d <= 8.0 * (1.0 - 0.6 * t)) & ~leaf
        img[blade] = green * 0.97 + rng.normal(0.0, 1.0, (blade.sum(), 3))

    shading = 1.0 + 0.06 * _frame(xx, yy, cx, cy, rng.uniform(0, 2 * math.pi))[0] / a
    contrast = rng.uniform(0.15, 0.25) if vein_contrast is None else float(vein_contrast)
    veins = _veins(xx, yy, cx, cy, a, b, angle, leaf, rng, contrast)
    lamina = green[None, :] * (shading * veins)[leaf][:, None]
    img[leaf] = lamina + rng.normal(0.0, 1.0, lamina.shape)

    if difficulty == "textured":
        u_dir = np.array([math.cos(angle), math.sin(angle)])
        v_dir = np.array([-math.sin(angle), math.cos(angle)])
        for _ in range(int(rng.integers(2, 4))):
            phi = rng.uniform(0, 2 * math.pi)
            spot = np.array([cx, cy]) + 0.97 * (a * math.cos(phi) * u_dir + b * math.sin(phi) * v_dir)
            r = rng.uniform(12, 18)
            hl = (np.hypot(xx - spot[0], yy - spot[1]) <= r) & leaf
            img[hl] = np.array([252.0, 252.0, 246.0]) + rng.normal(0.0, 1.0, (hl.sum(), 3))

    rgb = np.clip(np.floor(img + 0.5), 0, 255).astype(np.uint8)
    return rgb, leaf
