import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from leafextract.background_marker import excess_green, local_entropy
from leafextract.evaluation import (
    EvaluationReport,
    ImageScore,
    SyntheticItem,
    evaluate_corpus,
    pair_directory,
    precision_recall,
    synthetic_items,
)
from leafextract.imagecore import to_grayscale
from leafextract.io import write_mask
from leafextract.pipeline import PipelineConfig, extract_leaf
from leafextract.synthetic import DIFFICULTIES, generate_synthetic_scene

masks = arrays(bool, (9, 11))


# ---------------------------------------------------------------- precision / recall

def test_precision_recall_examples():
    g = np.zeros((10, 10), bool)
    g[2:8, 2:8] = True
    assert precision_recall(g, g) == (1.0, 1.0)
    half = g.copy()
    half[2:5] = False
    assert precision_recall(half, g) == (1.0, 0.5)
    other = np.zeros_like(g)
    other[0, 0] = True
    assert precision_recall(other, g) == (0.0, 0.0)


def test_precision_recall_empty_conventions():
    g = np.ones((3, 3), bool)
    assert precision_recall(np.zeros_like(g), g) == (0.0, 0.0)
    assert precision_recall(g, np.zeros_like(g)) == (0.0, 0.0)
    with pytest.raises(ValueError, match="shape mismatch"):
        precision_recall(g, np.ones((3, 4), bool))


@settings(max_examples=80, deadline=None)
@given(masks, masks)
def test_precision_recall_swap(a, b):
    p, r = precision_recall(a, b)
    assert precision_recall(b, a) == (r, p)
    assert 0 <= p <= 1 and 0 <= r <= 1


@settings(max_examples=60, deadline=None)
@given(masks, masks, st.integers(0, 6), st.integers(0, 6))
def test_precision_recall_translation(a, b, dy, dx):
    big_a = np.zeros((16, 18), bool)
    big_b = np.zeros((16, 18), bool)
    big_a[dy:dy + 9, dx:dx + 11] = a
    big_b[dy:dy + 9, dx:dx + 11] = b
    assert precision_recall(big_a, big_b) == precision_recall(a, b)


# ---------------------------------------------------------------- report

def _rows():
    return [
        ImageScore("a", 0.9, 0.8, 100, 110, 90, 0.5, 0.7, 0.6),
        ImageScore("b", 0.5, 1.0, 40, 20, 20, 0.4, 0.5, 0.9),
        ImageScore("c", 0.0, 0.0, 10, 50, 0, 0.3, 0.0, 0.0),
        ImageScore("d", error="OSError: gone"),
    ]


def test_report_aggregates_match_hand_sums():
    rep = EvaluationReport(_rows())
    assert rep.failed == 1 and rep.zero_score == 1
    assert rep.mean_precision == pytest.approx((0.9 + 0.5 + 0.0) / 3)
    assert rep.mean_recall == pytest.approx((0.8 + 1.0 + 0.0) / 3)
    assert rep.mean_precision_nonzero == pytest.approx((0.9 + 0.5) / 2)
    assert rep.mean_recall_nonzero == pytest.approx((0.8 + 1.0) / 2)
    assert rep.initial_mean_precision == pytest.approx(1.2 / 3)
    agg = rep.aggregate()
    assert agg["images"] == 4 and agg["processed"] == 3


def test_report_text_format():
    text = EvaluationReport(_rows()).to_text()
    lines = text.splitlines()
    assert len(lines) == 5
    assert lines[0].startswith("image=a status=ok precision=0.900000 recall=0.800000 leaf_px=100")
    assert "seconds" not in text
    assert lines[3] == 'image=d status=failed error="OSError: gone"'
    fields = dict(kv.split("=") for kv in lines[-1].split()[1:])
    assert fields["failed"] == "1" and fields["zero_score"] == "1"
    assert float(fields["mean_recall"]) == pytest.approx(0.6)
    assert "seconds=0.500" in EvaluationReport(_rows()).to_text(timing=True)
    assert "mean" in EvaluationReport(_rows()).to_table()


def test_empty_report_is_nan():
    rep = EvaluationReport([])
    assert math.isnan(rep.mean_precision)
    assert "mean_precision=nan" in rep.aggregate_line()


# ---------------------------------------------------------------- corpus runs

class _SelfTruth:
    """Scene whose ground truth is the pipeline's own output."""

    def __init__(self, seed):
        self.seed = seed

    def __call__(self):
        img, _ = generate_synthetic_scene(self.seed, "easy")
        return img, extract_leaf(img).mask


def _broken():
    raise OSError("unreadable")


def test_perfect_pipeline_scores_one():
    rep = evaluate_corpus([("s0", _SelfTruth(0))], PipelineConfig())
    assert (rep.mean_precision, rep.mean_recall) == (1.0, 1.0)


def test_failed_rows_are_counted_not_averaged():
    rep = evaluate_corpus([("bad", _broken), ("ok", SyntheticItem(0))], PipelineConfig(refine="none"))
    assert [r.name for r in rep.rows] == ["bad", "ok"]
    assert rep.failed == 1 and rep.rows[0].error == "OSError: unreadable"
    assert rep.mean_precision == rep.rows[1].precision


def test_corpus_is_deterministic_and_order_stable():
    items = synthetic_items(3, 4, "easy")
    cfg = PipelineConfig(refine="none")
    a = evaluate_corpus(items, cfg, workers=1).to_text()
    b = evaluate_corpus(items, cfg, workers=1).to_text()
    c = evaluate_corpus(items, cfg, workers=2).to_text()
    assert a == b == c
    assert [line.split()[0] for line in a.splitlines()[:3]] == ["image=easy_4", "image=easy_5", "image=easy_6"]


def test_ground_truth_resized_to_processed_scale():
    img, truth = generate_synthetic_scene(1, "easy")
    big = np.repeat(np.repeat(img, 2, axis=0), 2, axis=1)
    big_truth = np.repeat(np.repeat(truth, 2, axis=0), 2, axis=1)
    rep = evaluate_corpus([("big", lambda: (big, big_truth))], PipelineConfig(refine="none"))
    row = rep.rows[0]
    assert not row.failed and row.truth_px == truth.sum()


def test_pair_directory(tmp_path):
    (tmp_path / "img").mkdir()
    (tmp_path / "gt").mkdir()
    m = np.zeros((4, 4), bool)
    for stem in ("b", "a", "c"):
        write_mask(tmp_path / "img" / f"{stem}.png", m)
    for stem in ("a", "b", "z"):
        write_mask(tmp_path / "gt" / f"{stem}.png", m)
    (tmp_path / "img" / "notes.txt").write_text("x")
    pairs = pair_directory(tmp_path / "img", tmp_path / "gt")
    assert [name for name, _ in pairs] == ["a", "b"]
    assert pairs[0][1].truth.endswith("a.png")


# ---------------------------------------------------------------- synthetic scenes

@pytest.mark.parametrize("difficulty", DIFFICULTIES)
def test_synthetic_is_deterministic(difficulty):
    a = generate_synthetic_scene(3, difficulty)
    b = generate_synthetic_scene(3, difficulty)
    assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])
    assert a[0].dtype == np.uint8 and a[0].shape == (450, 600, 3)
    assert a[1].dtype == bool and a[1].any()
    assert not np.array_equal(a[0], generate_synthetic_scene(4, difficulty)[0])


@pytest.mark.parametrize("seed", range(5))
def test_easy_leaf_is_green(seed):
    img, truth = generate_synthetic_scene(seed, "easy")
    assert (excess_green(img)[truth] > 0).mean() >= 0.99


@pytest.mark.parametrize("seed", range(3))
def test_textured_scene_has_high_entropy_region(seed):
    img, _ = generate_synthetic_scene(seed, "textured")
    assert (local_entropy(to_grayscale(img)) > 220).any()


def test_occluded_scene_has_green_distractors():
    img, truth = generate_synthetic_scene(0, "occluded")
    green_outside = (excess_green(img) > 40) & ~truth
    assert green_outside.sum() > 0.1 * truth.sum()


def test_synthetic_rejects_unknown_difficulty():
    with pytest.raises(ValueError):
        generate_synthetic_scene(0, "impossible")
