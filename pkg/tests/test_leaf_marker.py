import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from leafextract.background_marker import build_background_marker
from leafextract.errors import MarkerVanishedError, NoLeafCandidateError
from leafextract.imagecore import disk, erode
from leafextract.leaf_marker import (
    LeafMarkerParams,
    build_leaf_marker,
    close_by_reconstruction,
    compute_region_stats,
    edge_cut,
    impose_minima,
    open_by_reconstruction,
    reconstruct,
    regional_maxima,
    regional_minima,
    select_and_grow,
    solidity,
)
from leafextract.synthetic import generate_synthetic_scene

from oracles import N8, components, plateau_maxima, reconstruct_naive

gray8 = arrays(np.uint8, (8, 8), elements=st.integers(0, 12))


@st.composite
def ordered_pair(draw, shape=(8, 8)):
    mask = draw(arrays(np.int64, shape, elements=st.integers(0, 20)))
    drop = draw(arrays(np.int64, shape, elements=st.integers(0, 20)))
    return np.maximum(mask - drop, 0), mask


# ---------------------------------------------------------------- reconstruction

def test_reconstruct_examples():
    mask = np.array([[3, 8, 9, 8, 2]], float)
    marker = np.array([[0, 0, 5, 0, 0]], float)
    assert reconstruct(marker, mask).tolist() == [[3, 5, 5, 5, 2]]
    assert np.array_equal(reconstruct(mask, mask), mask)
    assert not reconstruct(np.zeros_like(mask), mask).any()
    with pytest.raises(ValueError, match="ordering"):
        reconstruct(mask + 1, mask)
    with pytest.raises(ValueError, match="ordering"):
        reconstruct(mask - 1, mask, "erosion")


@settings(max_examples=60, deadline=None)
@given(ordered_pair())
def test_reconstruct_matches_naive(pair):
    marker, mask = pair
    assert np.array_equal(reconstruct(marker, mask), reconstruct_naive(marker, mask))


@settings(max_examples=40, deadline=None)
@given(ordered_pair())
def test_reconstruct_by_erosion_is_dual(pair):
    marker, mask = pair
    # complement both: marker >= mask, erosion-reconstruction
    got = reconstruct(255 - marker, 255 - mask, "erosion")
    assert np.array_equal(got, 255 - reconstruct_naive(marker, mask))


@settings(max_examples=40, deadline=None)
@given(ordered_pair(), arrays(np.int64, (8, 8), elements=st.integers(0, 5)))
def test_reconstruct_increasing_and_idempotent(pair, extra):
    marker, mask = pair
    bigger = np.minimum(marker + extra, mask)
    a = reconstruct(marker, mask)
    assert (a <= reconstruct(bigger, mask)).all()
    assert np.array_equal(reconstruct(a, mask), a)


def test_open_levels_small_specks():
    img = np.full((30, 30), 100, np.uint8)
    img[10, 10] = img[20, 5] = 200
    img[12:14, 20:22] = 180
    out = open_by_reconstruction(img, disk(2))
    assert (out == 100).all()
    big = np.full((30, 30), 100, np.uint8)
    big[5:25, 5:25] = 160
    assert np.array_equal(open_by_reconstruction(big, disk(2)), big)


@settings(max_examples=30, deadline=None)
@given(gray8)
def test_open_close_order_and_idempotence(img):
    se = disk(1)
    opened = open_by_reconstruction(img, se)
    assert (opened <= img).all()
    assert np.array_equal(open_by_reconstruction(opened, se), opened)
    closed = close_by_reconstruction(opened, se)
    assert (closed >= opened).all()
    const = np.full((5, 5), 7, np.uint8)
    assert np.array_equal(open_by_reconstruction(const, se), const)


# ---------------------------------------------------------------- extrema

def test_regional_maxima_examples():
    img = np.zeros((5, 5))
    img[2, 3] = 4
    assert np.array_equal(regional_maxima(img), img > 0)
    assert regional_maxima(np.full((4, 4), 3.0)).all()


@settings(max_examples=100, deadline=None)
@given(arrays(np.int64, (6, 6), elements=st.integers(0, 5)))
def test_regional_maxima_match_plateau_oracle(img):
    assert np.array_equal(regional_maxima(img), plateau_maxima(img))


def test_impose_minima_examples():
    grad = np.array([[5, 2, 5, 1, 5]], float)
    seeds = np.array([[True, False, False, False, False]])
    out = impose_minima(grad, seeds)
    mins = regional_minima(out)
    assert not mins[0, 3] and not mins[0, 1]
    assert np.array_equal(mins, seeds)
    assert np.ptp(impose_minima(grad, np.ones_like(seeds))) == 0
    with pytest.raises(ValueError):
        impose_minima(grad, np.zeros_like(seeds))


@settings(max_examples=100, deadline=None)
@given(arrays(np.int64, (6, 6), elements=st.integers(0, 9)),
       arrays(bool, (6, 6)).filter(lambda s: s.any()))
def test_imposed_minima_are_the_seed_components(grad, seeds):
    out = impose_minima(grad, seeds)
    mins = regional_minima(out)
    # the minima plateaus are exactly the seed components
    assert set(components(mins, N8)) == set(components(seeds, N8))


# ---------------------------------------------------------------- region stats

def _scene(labels, colors):
    img = np.zeros(labels.shape + (3,), np.uint8)
    for lab, rgb in colors.items():
        img[labels == lab] = rgb
    return img


def test_region_stats_solidity_and_green():
    labels = np.zeros((40, 40), np.int32)
    labels[5:15, 5:30] = 1                      # rectangle
    labels[20:40, 0:20] = 2                     # L shape: 20x20 minus a 10x10 quadrant
    labels[20:30, 10:20] = 3
    img = _scene(labels, {0: (150, 120, 90), 1: (60, 130, 40), 2: (150, 110, 80), 3: (150, 110, 80)})
    stats = {s.label: s for s in compute_region_stats(labels, img)}
    assert stats[1].solidity == pytest.approx(1.0, abs=0.02)
    assert stats[2].solidity == pytest.approx(6 / 7, abs=0.03)
    assert stats[1].is_green and not stats[2].is_green
    assert 3 in stats[2].adjacency and 2 in stats[3].adjacency


def test_solidity_bounded():
    rng = np.random.default_rng(0)
    for _ in range(20):
        m = rng.random((15, 15)) < 0.6
        assert 0 < solidity(m) <= 1.0 + 0.02


def _split_leaf():
    # a wavy vein splits a convex leaf into two non-convex halves
    yy, xx = np.mgrid[0:80, 0:80]
    leaf = (xx - 40) ** 2 / 30 ** 2 + (yy - 40) ** 2 / 20 ** 2 <= 1
    left = xx < 40 + 8 * np.sin(yy / 5.0)
    labels = np.where(leaf, np.where(left, 1, 2), 3).astype(np.int32)
    return labels


def test_select_and_grow_merges_similar_halves():
    labels = _split_leaf()
    img = _scene(labels, {1: (60, 130, 40), 2: (62, 133, 42), 3: (160, 120, 90)})
    sel = select_and_grow(compute_region_stats(labels, img), labels)
    assert np.array_equal(sel, labels < 3)


def test_select_and_grow_skips_dissimilar_hue():
    labels = _split_leaf()
    img = _scene(labels, {1: (60, 130, 40), 2: (130, 60, 140), 3: (160, 120, 90)})
    sel = select_and_grow(compute_region_stats(labels, img), labels)
    assert sel.sum() == (labels == 1).sum() or sel.sum() == (labels == 2).sum()


def test_select_and_grow_rejects_solidity_drop():
    labels = np.full((60, 60), 3, np.int32)
    labels[10:40, 10:40] = 1                     # solid square
    labels[24:26, 40:58] = 2                     # thin stalk sticking out
    img = _scene(labels, {1: (60, 130, 40), 2: (60, 130, 40), 3: (160, 120, 90)})
    sel = select_and_grow(compute_region_stats(labels, img), labels)
    assert np.array_equal(sel, labels == 1)


def test_select_and_grow_needs_green():
    labels = np.ones((10, 10), np.int32)
    img = _scene(labels, {1: (160, 120, 90)})
    with pytest.raises(NoLeafCandidateError, match="no leaf candidate"):
        select_and_grow(compute_region_stats(labels, img), labels)


# ---------------------------------------------------------------- edge cut

def test_edge_cut_solid_candidate_only_erodes():
    yy, xx = np.mgrid[0:60, 0:60]
    cand = (xx - 30) ** 2 + (yy - 30) ** 2 <= 20 ** 2
    assert solidity(cand) >= 0.95
    assert np.array_equal(edge_cut(cand, np.zeros_like(cand)), erode(cand, disk(3)))


def test_edge_cut_severs_occluding_leaf():
    yy, xx = np.mgrid[0:80, 0:120]
    target = (xx - 40) ** 2 + (yy - 40) ** 2 <= 30 ** 2
    other = (xx - 95) ** 2 + (yy - 40) ** 2 <= 20 ** 2
    cand = target | other
    edges = np.zeros_like(cand)
    edges[:, 71] = True                           # the occlusion boundary crosses the join
    assert solidity(cand) < 0.95
    out = edge_cut(cand, edges)
    assert out.any() and not (out & other & ~target).any()
    assert not (out & ~cand).any()


def test_edge_cut_vanishing_marker():
    cand = np.zeros((10, 10), bool)
    cand[4:6, 4:6] = True
    with pytest.raises(MarkerVanishedError) as info:
        edge_cut(cand, np.zeros_like(cand))
    assert np.array_equal(info.value.fallback, cand)


@settings(max_examples=30, deadline=None)
@given(arrays(bool, (20, 20)), arrays(bool, (20, 20)))
def test_edge_cut_output_within_candidate(cand, edges):
    try:
        out = edge_cut(cand, edges, LeafMarkerParams(final_erosion_radius=1))
    except MarkerVanishedError as exc:
        out = exc.fallback
    assert not (out & ~cand).any()


# ---------------------------------------------------------------- composition

@pytest.mark.parametrize("seed", [0, 1, 2])
def test_leaf_marker_inside_synthetic_leaf(seed):
    img, truth = generate_synthetic_scene(seed, "easy")
    bg = build_background_marker(img)
    marker = build_leaf_marker(img, bg)
    assert marker.any()
    assert not (marker & ~truth).any()
    assert marker.sum() >= 0.3 * truth.sum()
    assert not (marker & bg).any()


def test_leaf_marker_needs_foreground():
    img = np.zeros((20, 20, 3), np.uint8)
    with pytest.raises(NoLeafCandidateError):
        build_leaf_marker(img, np.ones((20, 20), bool))
