"""Precision/recall scoring and corpus reports."""

from __future__ import annotations

import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable

import numpy as np

from .imagecore import resize_mask_nearest
from .io import read_image, read_mask
from .pipeline import PipelineConfig, extract_leaf
from .synthetic import DIFFICULTIES, generate_synthetic_scene

__all__ = [
    "precision_recall",
    "ImageScore",
    "EvaluationReport",
    "FilePair",
    "SyntheticItem",
    "evaluate_corpus",
    "score_image",
    "generate_synthetic_scene",
    "DIFFICULTIES",
    "WORKERS_ENV",
]

WORKERS_ENV = "LEAFEXTRACT_WORKERS"


def precision_recall(leaf: np.ndarray, truth: np.ndarray) -> tuple[float, float]:
    """``|L & G| / |L|`` and ``|L & G| / |G|``; an empty denominator gives 0."""
    leaf = np.asarray(leaf, dtype=bool)
    truth = np.asarray(truth, dtype=bool)
    if leaf.shape != truth.shape:
        raise ValueError(f"shape mismatch: {leaf.shape} vs {truth.shape}")
    inter = int(np.count_nonzero(leaf & truth))
    n_leaf = int(np.count_nonzero(leaf))
    n_truth = int(np.count_nonzero(truth))
    p = inter / n_leaf if n_leaf else 0.0
    r = inter / n_truth if n_truth else 0.0
    return p, r


# ---------------------------------------------------------------------------
# corpus items
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FilePair:
    """Image and ground-truth mask on disk."""

    image: str
    truth: str

    def __call__(self):
        return read_image(self.image), read_mask(self.truth)


@dataclass(frozen=True)
class SyntheticItem:
    seed: int
    difficulty: str = "easy"
    vein_contrast: float | None = None

    def __call__(self):
        return generate_synthetic_scene(self.seed, self.difficulty, self.vein_contrast)


# ---------------------------------------------------------------------------
# report
# ---------------------------------------------------------------------------

@dataclass
class ImageScore:
    """One row of the report. ``error`` is set (and scores are NaN) on failure."""

    name: str
    precision: float = math.nan
    recall: float = math.nan
    leaf_px: int = 0
    truth_px: int = 0
    overlap_px: int = 0
    seconds: float = 0.0
    initial_precision: float = math.nan
    initial_recall: float = math.nan
    error: str | None = None

    @property
    def failed(self) -> bool:
        return self.error is not None

    @property
    def zero(self) -> bool:
        return not self.failed and self.precision == 0.0 and self.recall == 0.0


def _mean(values) -> float:
    values = list(values)
    return float(sum(values) / len(values)) if values else math.nan


def _fmt(x: float) -> str:
    return "nan" if math.isnan(x) else f"{x:.6f}"


@dataclass
class EvaluationReport:
    rows: list[ImageScore] = field(default_factory=list)

    @property
    def scored(self) -> list[ImageScore]:
        return [r for r in self.rows if not r.failed]

    @property
    def failed(self) -> int:
        return sum(r.failed for r in self.rows)

    @property
    def zero_score(self) -> int:
        return sum(r.zero for r in self.rows)

    @property
    def mean_precision(self) -> float:
        return _mean(r.precision for r in self.scored)

    @property
    def mean_recall(self) -> float:
        return _mean(r.recall for r in self.scored)

    @property
    def mean_precision_nonzero(self) -> float:
        return _mean(r.precision for r in self.scored if not r.zero)

    @property
    def mean_recall_nonzero(self) -> float:
        return _mean(r.recall for r in self.scored if not r.zero)

    @property
    def initial_mean_precision(self) -> float:
        return _mean(r.initial_precision for r in self.scored)

    @property
    def initial_mean_recall(self) -> float:
        return _mean(r.initial_recall for r in self.scored)

    def aggregate(self) -> dict[str, float | int]:
        return {
            "images": len(self.rows),
            "processed": len(self.scored),
            "failed": self.failed,
            "zero_score": self.zero_score,
            "mean_precision": self.mean_precision,
            "mean_recall": self.mean_recall,
            "mean_precision_nonzero": self.mean_precision_nonzero,
            "mean_recall_nonzero": self.mean_recall_nonzero,
            "initial_mean_precision": self.initial_mean_precision,
            "initial_mean_recall": self.initial_mean_recall,
        }

    def aggregate_line(self) -> str:
        return " ".join(f"{k}={v if isinstance(v, int) else _fmt(v)}" for k, v in self.aggregate().items())

    def to_text(self, timing: bool = False) -> str:
        """Key/value records: one ``image=`` line per row, then the aggregate.

        Wall time is left out unless ``timing`` so that reports of the same
        run compare byte for byte.
        """
        lines = []
        for r in self.rows:
            if r.failed:
                err = r.error.replace('"', "'").replace("\n", " ")
                lines.append(f'image={r.name} status=failed error="{err}"')
                continue
            rec = (f"image={r.name} status=ok precision={_fmt(r.precision)} recall={_fmt(r.recall)} "
                   f"leaf_px={r.leaf_px} truth_px={r.truth_px} overlap_px={r.overlap_px} "
                   f"initial_precision={_fmt(r.initial_precision)} initial_recall={_fmt(r.initial_recall)}")
            if timing:
                rec += f" seconds={r.seconds:.3f}"
            lines.append(rec)
        lines.append("aggregate " + self.aggregate_line())
        return "\n".join(lines) + "\n"

    def to_table(self) -> str:
        """Fixed-width table for reading at a terminal."""
        width = max([5] + [len(r.name) for r in self.rows])
        head = f"{'image':<{width}}  {'P':>6}  {'R':>6}  {'P0':>6}  {'R0':>6}  {'sec':>6}"
        lines = [head, "-" * len(head)]
        for r in self.rows:
            if r.failed:
                lines.append(f"{r.name:<{width}}  failed: {r.error}")
            else:
                lines.append(f"{r.name:<{width}}  {r.precision:6.3f}  {r.recall:6.3f}  "
                             f"{r.initial_precision:6.3f}  {r.initial_recall:6.3f}  {r.seconds:6.2f}")
        lines.append("-" * len(head))
        lines.append(f"{'mean':<{width}}  {self.mean_precision:6.3f}  {self.mean_recall:6.3f}  "
                     f"{self.initial_mean_precision:6.3f}  {self.initial_mean_recall:6.3f}")
        return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------

def score_image(name: str, loader: Callable, config: PipelineConfig) -> ImageScore:
    """Load, extract and score one item; any failure becomes an error row."""
    t0 = time.perf_counter()
    try:
        img, truth = loader()
        res = extract_leaf(img, config)
        truth = resize_mask_nearest(truth, res.mask.shape)
        p, r = precision_recall(res.mask, truth)
        p0, r0 = precision_recall(res.initial, truth)
    except Exception as exc:  # noqa: BLE001 - a corpus run records and continues
        return ImageScore(name, seconds=time.perf_counter() - t0,
                          error=f"{type(exc).__name__}: {exc}")
    return ImageScore(
        name, p, r,
        leaf_px=int(res.mask.sum()), truth_px=int(truth.sum()), overlap_px=int((res.mask & truth).sum()),
        seconds=time.perf_counter() - t0, initial_precision=p0, initial_recall=r0,
    )


def _score_star(args):
    return score_image(*args)


def default_workers() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


def evaluate_corpus(items: Iterable[tuple[str, Callable]], config: PipelineConfig = PipelineConfig(),
                    workers: int | None = None) -> EvaluationReport:
    """Score every ``(name, loader)`` item; ``loader()`` returns ``(rgb, truth)``.

    Rows follow the input order whatever the worker count. With more than
    one worker the loaders must be picklable (:class:`FilePair`,
    :class:`SyntheticItem`).
    """
    jobs = [(name, loader, config) for name, loader in items]
    n = default_workers() if workers is None else max(1, int(workers))
    if n == 1 or len(jobs) <= 1:
        rows = [score_image(*job) for job in jobs]
    else:
        with ProcessPoolExecutor(max_workers=min(n, len(jobs))) as pool:
            rows = list(pool.map(_score_star, jobs))
    return EvaluationReport(rows)


_IMAGE_SUFFIXES = {".png", ".jpg", ".jpeg", ".bmp", ".tif", ".tiff"}


def pair_directory(image_dir, truth_dir) -> list[tuple[str, FilePair]]:
    """Match images to masks by filename stem, sorted by stem."""
    images = {p.stem: p for p in Path(image_dir).iterdir() if p.suffix.lower() in _IMAGE_SUFFIXES}
    truths = {p.stem: p for p in Path(truth_dir).iterdir() if p.suffix.lower() in _IMAGE_SUFFIXES}
    return [(s, FilePair(str(images[s]), str(truths[s]))) for s in sorted(images.keys() & truths.keys())]


def synthetic_items(n: int, seed: int, difficulty: str = "easy") -> list[tuple[str, SyntheticItem]]:
    """``n`` scenes with seeds ``seed, seed + 1, ...``."""
    return [(f"{difficulty}_{seed + i}", SyntheticItem(seed + i, difficulty)) for i in range(n)]
