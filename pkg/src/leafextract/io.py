"""Image, mask and polar-table files."""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np
from PIL import Image

from .imagecore import as_rgb, erode, square

__all__ = ["read_image", "read_mask", "write_mask", "write_gray", "write_overlay", "write_polar_csv"]


def read_image(path) -> np.ndarray:
    """RGB uint8 array of an image file (alpha and palettes dropped)."""
    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"), dtype=np.uint8).copy()


def read_mask(path) -> np.ndarray:
    """Boolean mask: gray level above 127."""
    with Image.open(path) as im:
        return np.asarray(im.convert("L")) > 127


def write_mask(path, mask: np.ndarray) -> None:
    """8-bit single-channel PNG, 255 on the mask."""
    data = np.where(np.asarray(mask, dtype=bool), 255, 0).astype(np.uint8)
    Image.fromarray(data, mode="L").save(Path(path), format="PNG")


def write_gray(path, img: np.ndarray) -> None:
    data = np.clip(np.asarray(img, dtype=np.float64), 0, 255).astype(np.uint8)
    Image.fromarray(data, mode="L").save(Path(path), format="PNG")


def write_overlay(path, img: np.ndarray, mask: np.ndarray) -> None:
    """Input image with the mask boundary painted red."""
    mask = np.asarray(mask, dtype=bool)
    rgb = as_rgb(img).copy()
    boundary = mask & ~erode(mask, square(3))
    rgb[boundary] = (255, 0, 0)
    Image.fromarray(rgb, mode="RGB").save(Path(path), format="PNG")


def write_polar_csv(path, rows) -> None:
    """``rows`` of ``(theta_deg, r_px, anomalous, fitted_r)``."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["theta_deg", "r_px", "anomalous_flag", "fitted_r"])
        for t, r, flag, fit in rows:
            w.writerow([f"{t:.4f}", f"{r:.4f}", int(bool(flag)), f"{fit:.4f}"])
