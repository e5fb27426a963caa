"""Slow, obviously-correct reference implementations used by the tests."""

from __future__ import annotations

import heapq
import itertools
from fractions import Fraction

import numpy as np

N4 = ((-1, 0), (1, 0), (0, -1), (0, 1))
N8 = tuple((dr, dc) for dr in (-1, 0, 1) for dc in (-1, 0, 1) if (dr, dc) != (0, 0))


def neighbors(r, c, shape, offsets=N4):
    h, w = shape
    for dr, dc in offsets:
        rr, cc = r + dr, c + dc
        if 0 <= rr < h and 0 <= cc < w:
            yield rr, cc


def min_cut_bruteforce(n, arcs, s, t):
    """Minimum over all s-t partitions of the capacity leaving the source side."""
    others = [v for v in range(n) if v not in (s, t)]
    best = None
    for bits in itertools.product((0, 1), repeat=len(others)):
        side = {s} | {v for v, b in zip(others, bits) if b}
        cap = sum(c for a, b, c in arcs if a in side and b not in side)
        best = cap if best is None else min(best, cap)
    return best


def minimax_values(relief, seed, blocked=()):
    """Smallest achievable maximum relief along a 4-path leaving ``seed``.

    The seed's own relief does not count and paths may not enter ``blocked``.
    """
    h, w = relief.shape
    best = np.full((h, w), np.inf)
    best[seed] = -np.inf
    heap = [(-np.inf, seed)]
    while heap:
        v, (r, c) = heapq.heappop(heap)
        if v > best[r, c]:
            continue
        for rr, cc in neighbors(r, c, (h, w)):
            if (rr, cc) in blocked:
                continue
            nv = max(v, relief[rr, cc])
            if nv < best[rr, cc]:
                best[rr, cc] = nv
                heapq.heappush(heap, (nv, (rr, cc)))
    return best


def minimax_labels(relief, seeds):
    """Label 1 or 2 for the seed with the strictly smaller minimax value, 0 on ties."""
    v1 = minimax_values(relief, seeds[0], blocked=(seeds[1],))
    v2 = minimax_values(relief, seeds[1], blocked=(seeds[0],))
    out = np.where(v1 < v2, 1, np.where(v2 < v1, 2, 0))
    out[seeds[0]] = 1
    out[seeds[1]] = 2
    return out


def otsu_bruteforce(hist):
    """Smallest t maximizing between-class variance, in exact rational arithmetic."""
    hist = [int(x) for x in hist]
    total = sum(hist)
    total_mass = sum(i * c for i, c in enumerate(hist))
    best_t, best_v = None, None
    w0 = m0 = 0
    for t in range(256):
        w0 += hist[t]
        m0 += t * hist[t]
        w1 = total - w0
        if w0 == 0 or w1 == 0:
            continue
        mu0 = Fraction(m0, w0)
        mu1 = Fraction(total_mass - m0, w1)
        v = Fraction(w0 * w1, total * total) * (mu0 - mu1) ** 2
        if best_v is None or v > best_v:
            best_t, best_v = t, v
    if best_t is None:  # a single populated bin: nothing to split
        return next(i for i, c in enumerate(hist) if c)
    return best_t


def reconstruct_naive(marker, mask):
    """Geodesic dilation (8-connected) of ``marker`` under ``mask`` until stable."""
    cur = np.minimum(marker, mask).astype(np.float64)
    h, w = cur.shape
    while True:
        nxt = cur.copy()
        for r in range(h):
            for c in range(w):
                m = cur[r, c]
                for rr, cc in neighbors(r, c, (h, w), N8):
                    m = max(m, cur[rr, cc])
                nxt[r, c] = min(m, mask[r, c])
        if np.array_equal(nxt, cur):
            return cur
        cur = nxt


def plateau_maxima(img, offsets=N8):
    """Regional maxima by flooding each plateau and checking its outer neighbors."""
    h, w = img.shape
    seen = np.zeros((h, w), bool)
    out = np.zeros((h, w), bool)
    for r in range(h):
        for c in range(w):
            if seen[r, c]:
                continue
            v = img[r, c]
            comp, stack, is_max = [], [(r, c)], True
            seen[r, c] = True
            while stack:
                p = stack.pop()
                comp.append(p)
                for q in neighbors(*p, (h, w), offsets):
                    if img[q] == v and not seen[q]:
                        seen[q] = True
                        stack.append(q)
                    elif img[q] > v:
                        is_max = False
            if is_max:
                for p in comp:
                    out[p] = True
    return out


def components(mask, offsets):
    """Connected components of a boolean mask as a list of pixel sets."""
    h, w = mask.shape
    seen = np.zeros((h, w), bool)
    out = []
    for r in range(h):
        for c in range(w):
            if mask[r, c] and not seen[r, c]:
                comp, stack = set(), [(r, c)]
                seen[r, c] = True
                while stack:
                    p = stack.pop()
                    comp.add(p)
                    for q in neighbors(*p, (h, w), offsets):
                        if mask[q] and not seen[q]:
                            seen[q] = True
                            stack.append(q)
                out.append(frozenset(comp))
    return out


def lstsq_gauss(x, y, degree=3):
    """Least squares by Gaussian elimination with full pivoting on the normal
    equations, in exact fractions; coefficients highest power first."""
    xs = [Fraction(v) for v in x]
    ys = [Fraction(v) for v in y]
    n = degree + 1
    A = [[sum(xi ** (2 * degree - i - j) for xi in xs) for j in range(n)] for i in range(n)]
    b = [sum(yi * xi ** (degree - i) for xi, yi in zip(xs, ys)) for i in range(n)]
    M = [row[:] + [bi] for row, bi in zip(A, b)]
    cols = list(range(n))
    for k in range(n):
        piv = max(((i, j) for i in range(k, n) for j in range(k, n)), key=lambda ij: abs(M[ij[0]][cols[ij[1]]]))
        i, j = piv
        M[k], M[i] = M[i], M[k]
        cols[k], cols[j] = cols[j], cols[k]
        for i in range(k + 1, n):
            f = M[i][cols[k]] / M[k][cols[k]]
            for jj in range(n + 1):
                if jj < n:
                    M[i][cols[jj]] -= f * M[k][cols[jj]]
                else:
                    M[i][n] -= f * M[k][n]
    sol = [Fraction(0)] * n
    for k in reversed(range(n)):
        acc = M[k][n] - sum(M[k][cols[j]] * sol[cols[j]] for j in range(k + 1, n))
        sol[cols[k]] = acc / M[k][cols[k]]
    return [float(v) for v in sol]
