"""Cut the initial leaf out of the image from the leaf and background
markers, with marker-controlled watershed or a seeded s-t minimum cut."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import _kernels
from .imagecore import gradient_magnitude, to_grayscale
from .leaf_marker import impose_minima

__all__ = [
    "SeededGraph",
    "MaxFlowResult",
    "GraphCutParams",
    "watershed",
    "max_flow",
    "pixel_graph",
    "estimate_sigma",
    "graph_cut_segment",
    "watershed_segment",
    "segment",
]

_EPS = 1e-12


def watershed(relief: np.ndarray, seeds: np.ndarray, mask: np.ndarray | None = None,
              watershed_line: bool = True) -> np.ndarray:
    """Flood ``relief`` from labeled ``seeds`` (4-connectivity).

    Pixels are claimed in increasing order of the highest relief met on the
    way from a seed (ties in FIFO order). With ``watershed_line`` a pixel
    reached when it already touches two different basins becomes a ridge
    (label 0). Seed pixels always keep their label. Pixels outside ``mask``
    are never flooded and stay 0.
    """
    relief = np.asarray(relief, dtype=np.float64)
    seeds = np.asarray(seeds)
    if seeds.shape != relief.shape:
        raise ValueError("relief and seeds shapes differ")
    if not (seeds > 0).any():
        raise ValueError("watershed needs at least one seed")
    allowed = np.ones(relief.shape, dtype=bool) if mask is None else np.asarray(mask, dtype=bool)
    labels = np.where(seeds > 0, seeds, 0).astype(np.int64)
    return _kernels.flood(relief, labels, allowed, bool(watershed_line)).astype(np.int32)


# ---------------------------------------------------------------------------
# max-flow
# ---------------------------------------------------------------------------

@dataclass
class SeededGraph:
    """Directed graph for s-t max-flow.

    Arc ``i`` runs ``tails[i] -> heads[i]`` with capacity ``caps[i]``;
    ``rev_caps[i]`` (default 0) is the capacity of the opposite direction,
    which lets an undirected pixel link be stored as one arc pair.
    """

    n_nodes: int
    tails: np.ndarray
    heads: np.ndarray
    caps: np.ndarray
    source: int
    sink: int
    rev_caps: np.ndarray | None = None

    def __post_init__(self):
        self.tails = np.asarray(self.tails, dtype=np.int64)
        self.heads = np.asarray(self.heads, dtype=np.int64)
        self.caps = np.asarray(self.caps, dtype=np.float64)
        if self.rev_caps is None:
            self.rev_caps = np.zeros_like(self.caps)
        else:
            self.rev_caps = np.asarray(self.rev_caps, dtype=np.float64)
        if not (len(self.tails) == len(self.heads) == len(self.caps) == len(self.rev_caps)):
            raise ValueError("arc arrays must have equal length")
        if np.any(self.caps < 0) or np.any(self.rev_caps < 0):
            raise ValueError("capacities must be non-negative")
        for arr in (self.tails, self.heads):
            if arr.size and (arr.min() < 0 or arr.max() >= self.n_nodes):
                raise ValueError("arc endpoint out of range")

    @classmethod
    def from_arcs(cls, n_nodes: int, arcs, source: int, sink: int) -> "SeededGraph":
        """Build from an iterable of ``(tail, head, capacity)``."""
        arcs = list(arcs)
        if arcs:
            t, h, c = zip(*arcs)
        else:
            t = h = c = ()
        return cls(n_nodes, np.array(t, dtype=np.int64), np.array(h, dtype=np.int64),
                   np.array(c, dtype=np.float64), source, sink)


class MaxFlowResult(NamedTuple):
    value: float
    source_side: np.ndarray
    arc_flow: np.ndarray

    def cut_capacity(self, g: SeededGraph) -> float:
        """Capacity of the arcs leaving the source side."""
        s = self.source_side
        fwd = s[g.tails] & ~s[g.heads]
        bwd = s[g.heads] & ~s[g.tails]
        return float(g.caps[fwd].sum() + g.rev_caps[bwd].sum())


def max_flow(g: SeededGraph) -> MaxFlowResult:
    """Maximum s-t flow (Dinic) and the source side of a minimum cut.

    ``arc_flow[i]`` is the net flow along arc ``i`` from tail to head
    (negative when it runs along the reverse capacity).
    """
    if g.source == g.sink:
        raise ValueError("source and sink must differ")
    n = int(g.n_nodes)
    m = len(g.caps)
    to = np.empty(2 * m, dtype=np.int64)
    to[0::2] = g.heads
    to[1::2] = g.tails
    cap = np.empty(2 * m, dtype=np.float64)
    cap[0::2] = g.caps
    cap[1::2] = g.rev_caps
    frm = np.empty(2 * m, dtype=np.int64)
    frm[0::2] = g.tails
    frm[1::2] = g.heads
    # adjacency lists as linked lists over arc ids, in arc order
    head = np.full(n, -1, dtype=np.int64)
    nxt = np.full(2 * m, -1, dtype=np.int64)
    if m:
        order = np.argsort(frm, kind="stable")
        sorted_from = frm[order]
        starts = np.searchsorted(sorted_from, np.arange(n), side="left")
        ends = np.searchsorted(sorted_from, np.arange(n), side="right")
        nonempty = ends > starts
        head[nonempty] = order[starts[nonempty]]
        link = np.ones(2 * m, dtype=bool)
        link[ends[nonempty] - 1] = False
        nxt[order[link]] = order[np.flatnonzero(link) + 1]
    scale = max(float(cap.max()) if cap.size else 0.0, 1.0)
    eps = _EPS * scale
    residual = cap.copy()
    value = _kernels.dinic(n, head, nxt, to, residual, int(g.source), int(g.sink), eps)
    side = _kernels.residual_reachable(n, head, nxt, to, residual, int(g.source), eps)
    arc_flow = g.caps - residual[0::2]
    return MaxFlowResult(float(value), side, arc_flow)


# ---------------------------------------------------------------------------
# graph cut
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GraphCutParams:
    """``sigma=None`` estimates the contrast scale from the image."""

    sigma: float | None = None
    lam: float = 1.0

    def __post_init__(self):
        if self.sigma is not None and not self.sigma > 0:
            raise ValueError("sigma must be positive")
        if self.lam < 0:
            raise ValueError("lam must be non-negative")


def estimate_sigma(gray: np.ndarray) -> float:
    """Mean absolute intensity difference over 4-neighbor pairs (1.0 if flat)."""
    g = np.asarray(gray, dtype=np.float64)
    diffs = np.concatenate([np.abs(np.diff(g, axis=1)).ravel(), np.abs(np.diff(g, axis=0)).ravel()])
    s = float(diffs.mean()) if diffs.size else 0.0
    return s if s > 0 else 1.0


def _check_seeds(leaf: np.ndarray, bg: np.ndarray):
    leaf = np.asarray(leaf, dtype=bool)
    bg = np.asarray(bg, dtype=bool)
    if leaf.shape != bg.shape:
        raise ValueError("marker shapes differ")
    if not leaf.any() or not bg.any():
        raise ValueError("both markers must be nonempty")
    if (leaf & bg).any():
        raise ValueError("leaf and background markers overlap")
    return leaf, bg


def pixel_graph(gray: np.ndarray, leaf: np.ndarray, bg: np.ndarray,
                params: GraphCutParams = GraphCutParams()) -> SeededGraph:
    """4-connected pixel graph with Gaussian contrast links and hard seeds.

    Node ``r * W + c`` is pixel ``(r, c)``; the source and sink come last.
    Leaf pixels hang off the source and background pixels off the sink with
    a capacity larger than all finite capacities combined.
    """
    leaf, bg = _check_seeds(leaf, bg)
    g = np.asarray(gray, dtype=np.float64)
    h, w = g.shape
    sigma = params.sigma if params.sigma is not None else estimate_sigma(g)
    idx = np.arange(h * w, dtype=np.int64).reshape(h, w)

    def link(a, b, ia, ib):
        wgt = params.lam * np.exp(-((a - b) ** 2) / (2.0 * sigma * sigma))
        return ia.ravel(), ib.ravel(), wgt.ravel()

    t1, h1, w1 = link(g[:, :-1], g[:, 1:], idx[:, :-1], idx[:, 1:])
    t2, h2, w2 = link(g[:-1, :], g[1:, :], idx[:-1, :], idx[1:, :])
    finite = np.concatenate([w1, w2])
    inf = float(finite.sum()) + 1.0
    source, sink = h * w, h * w + 1
    leaf_idx = idx[leaf]
    bg_idx = idx[bg]
    tails = np.concatenate([t1, t2, np.full(leaf_idx.size, source), bg_idx])
    heads = np.concatenate([h1, h2, leaf_idx, np.full(bg_idx.size, sink)])
    caps = np.concatenate([finite, np.full(leaf_idx.size + bg_idx.size, inf)])
    rev = np.concatenate([finite, np.zeros(leaf_idx.size + bg_idx.size)])
    return SeededGraph(h * w + 2, tails, heads, caps, source, sink, rev_caps=rev)


def graph_cut_segment(img: np.ndarray, leaf: np.ndarray, bg: np.ndarray,
                      params: GraphCutParams = GraphCutParams()) -> np.ndarray:
    """Leaf mask as the source side of the minimum cut of ``pixel_graph``."""
    gray = to_grayscale(img)
    graph = pixel_graph(gray, leaf, bg, params)
    res = max_flow(graph)
    h, w = gray.shape
    return res.source_side[: h * w].reshape(h, w)


def watershed_segment(img: np.ndarray, leaf: np.ndarray, bg: np.ndarray) -> np.ndarray:
    """Leaf mask from watershed on the marker-imposed gradient.

    The leaf marker floods as label 1, every background component as
    label 2; ridge pixels go to the background.
    """
    leaf, bg = _check_seeds(leaf, bg)
    gray = to_grayscale(img)
    relief = impose_minima(gradient_magnitude(gray), leaf | bg)
    seeds = np.zeros(gray.shape, dtype=np.int32)
    seeds[leaf] = 1
    seeds[bg] = 2
    return watershed(relief, seeds) == 1


def segment(img: np.ndarray, leaf: np.ndarray, bg: np.ndarray, method: str = "watershed",
            graphcut: GraphCutParams = GraphCutParams()) -> np.ndarray:
    """Dispatch to the selected segmenter."""
    if method == "watershed":
        return watershed_segment(img, leaf, bg)
    if method == "graphcut":
        return graph_cut_segment(img, leaf, bg, graphcut)
    raise ValueError(f"unknown method {method!r}")
