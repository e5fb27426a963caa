"""Compiled inner loops: geodesic reconstruction, plateau maxima, flooding
and max-flow. Every kernel works on raveled 2-D arrays."""

import heapq

import numpy as np
from numba import njit

# 8-neighborhood, split into the half visited before a pixel in raster order
# (N-) and the half visited after it (N+)
_DR8 = np.array([-1, -1, -1, 0, 0, 1, 1, 1])
_DC8 = np.array([-1, 0, 1, -1, 1, -1, 0, 1])
_DR4 = np.array([-1, 0, 0, 1])
_DC4 = np.array([0, -1, 1, 0])


@njit(cache=True)
def reconstruct_dilation(marker, mask):
    """Vincent's hybrid reconstruction-by-dilation, 8-connectivity.

    ``marker`` (<= ``mask``) is modified in place and returned.
    """
    h, w = marker.shape
    # forward raster scan over the causal half
    for r in range(h):
        for c in range(w):
            v = marker[r, c]
            for k in range(4):
                rr = r + _DR8[k]
                cc = c + _DC8[k]
                if 0 <= rr < h and 0 <= cc < w and marker[rr, cc] > v:
                    v = marker[rr, cc]
            m = mask[r, c]
            marker[r, c] = v if v < m else m

    n = h * w
    queue = np.empty(n, dtype=np.int64)
    inq = np.zeros(n, dtype=np.bool_)
    head = 0
    size = 0
    # backward scan over the anti-causal half; seed the FIFO
    for r in range(h - 1, -1, -1):
        for c in range(w - 1, -1, -1):
            v = marker[r, c]
            for k in range(4, 8):
                rr = r + _DR8[k]
                cc = c + _DC8[k]
                if 0 <= rr < h and 0 <= cc < w and marker[rr, cc] > v:
                    v = marker[rr, cc]
            m = mask[r, c]
            v = v if v < m else m
            marker[r, c] = v
            for k in range(4, 8):
                rr = r + _DR8[k]
                cc = c + _DC8[k]
                if 0 <= rr < h and 0 <= cc < w:
                    if marker[rr, cc] < v and marker[rr, cc] < mask[rr, cc]:
                        p = r * w + c
                        if not inq[p]:
                            queue[(head + size) % n] = p
                            size += 1
                            inq[p] = True
                        break
    while size > 0:
        p = queue[head]
        head = (head + 1) % n
        size -= 1
        inq[p] = False
        r = p // w
        c = p - r * w
        v = marker[r, c]
        for k in range(8):
            rr = r + _DR8[k]
            cc = c + _DC8[k]
            if 0 <= rr < h and 0 <= cc < w:
                q = rr * w + cc
                if marker[rr, cc] < v and mask[rr, cc] != marker[rr, cc]:
                    m = mask[rr, cc]
                    marker[rr, cc] = v if v < m else m
                    if not inq[q]:
                        queue[(head + size) % n] = q
                        size += 1
                        inq[q] = True
    return marker


@njit(cache=True)
def regional_maxima(img):
    """Boolean mask of 8-connected plateaus with no strictly higher neighbor."""
    h, w = img.shape
    n = h * w
    out = np.zeros((h, w), dtype=np.bool_)
    seen = np.zeros(n, dtype=np.bool_)
    stack = np.empty(n, dtype=np.int64)
    members = np.empty(n, dtype=np.int64)
    for start in range(n):
        if seen[start]:
            continue
        r0 = start // w
        c0 = start - r0 * w
        val = img[r0, c0]
        top = 0
        nm = 0
        stack[top] = start
        top += 1
        seen[start] = True
        is_max = True
        while top > 0:
            top -= 1
            p = stack[top]
            members[nm] = p
            nm += 1
            r = p // w
            c = p - r * w
            for k in range(8):
                rr = r + _DR8[k]
                cc = c + _DC8[k]
                if 0 <= rr < h and 0 <= cc < w:
                    q = rr * w + cc
                    nv = img[rr, cc]
                    if nv > val:
                        is_max = False
                    elif nv == val and not seen[q]:
                        seen[q] = True
                        stack[top] = q
                        top += 1
        if is_max:
            for i in range(nm):
                p = members[i]
                r = p // w
                out[r, p - r * w] = True
    return out


@njit(cache=True)
def flood(relief, labels, allowed, ridges):
    """Priority flood from labeled seeds over a 4-connected grid.

    A pixel's priority is the highest relief on the path that reached it
    (bottleneck cost, the seed's own relief excluded); equal priorities pop
    in FIFO order. Pixels are
    labeled when popped. With ``ridges`` a popped pixel touching two
    different labels becomes a ridge (label 0) and does not propagate.
    ``allowed`` masks the pixels that may be flooded. ``labels`` is updated
    in place.
    """
    h, w = relief.shape
    done = np.zeros((h, w), dtype=np.bool_)
    heap = [(0.0, np.int64(0), np.int64(0), np.int64(0))]
    heap.pop()
    age = 0
    for r in range(h):
        for c in range(w):
            if labels[r, c] > 0:
                done[r, c] = True
    for r in range(h):
        for c in range(w):
            if labels[r, c] > 0:
                for k in range(4):
                    rr = r + _DR4[k]
                    cc = c + _DC4[k]
                    if 0 <= rr < h and 0 <= cc < w and not done[rr, cc] and allowed[rr, cc]:
                        age += 1
                        heapq.heappush(heap, (relief[rr, cc], age, rr * w + cc, np.int64(labels[r, c])))
    while len(heap) > 0:
        prio, _, p, lab = heapq.heappop(heap)
        r = p // w
        c = p - r * w
        if done[r, c]:
            continue
        done[r, c] = True
        if ridges:
            other = 0
            for k in range(4):
                rr = r + _DR4[k]
                cc = c + _DC4[k]
                if 0 <= rr < h and 0 <= cc < w:
                    nl = labels[rr, cc]
                    if nl > 0 and done[rr, cc]:
                        if other == 0:
                            other = nl
                        elif nl != other:
                            other = -1
                            break
            if other == -1:
                labels[r, c] = 0
                continue
        labels[r, c] = lab
        for k in range(4):
            rr = r + _DR4[k]
            cc = c + _DC4[k]
            if 0 <= rr < h and 0 <= cc < w and not done[rr, cc] and allowed[rr, cc]:
                nv = relief[rr, cc]
                p2 = nv if nv > prio else prio
                age += 1
                heapq.heappush(heap, (p2, age, rr * w + cc, np.int64(lab)))
    return labels


@njit(cache=True)
def dinic(n, head, nxt, to, cap, source, sink, eps):
    """Dinic max-flow on an adjacency list with paired reverse arcs.

    Arc ``e ^ 1`` is the reverse of arc ``e``. ``cap`` holds residual
    capacities and is updated in place. Returns the flow value.
    """
    level = np.empty(n, dtype=np.int64)
    it = np.empty(n, dtype=np.int64)
    queue = np.empty(n, dtype=np.int64)
    path = np.empty(n, dtype=np.int64)
    total = 0.0
    while True:
        level[:] = -1
        level[source] = 0
        qh = 0
        qt = 0
        queue[qt] = source
        qt += 1
        while qh < qt:
            u = queue[qh]
            qh += 1
            e = head[u]
            while e != -1:
                v = to[e]
                if level[v] < 0 and cap[e] > eps:
                    level[v] = level[u] + 1
                    queue[qt] = v
                    qt += 1
                e = nxt[e]
        if level[sink] < 0:
            break
        for u in range(n):
            it[u] = head[u]
        # iterative DFS for blocking flow; path[] stores arc ids
        while True:
            depth = 0
            u = source
            found = False
            while True:
                if u == sink:
                    found = True
                    break
                advanced = False
                while it[u] != -1:
                    e = it[u]
                    v = to[e]
                    if cap[e] > eps and level[v] == level[u] + 1:
                        path[depth] = e
                        depth += 1
                        u = v
                        advanced = True
                        break
                    it[u] = nxt[e]
                if not advanced:
                    if depth == 0:
                        break
                    # dead end: retreat and skip the arc that led here
                    level[u] = -1
                    depth -= 1
                    e = path[depth]
                    u = to[e ^ 1]
                    it[u] = nxt[e]
            if not found:
                break
            push = np.inf
            for i in range(depth):
                if cap[path[i]] < push:
                    push = cap[path[i]]
            for i in range(depth):
                e = path[i]
                cap[e] -= push
                cap[e ^ 1] += push
            total += push
    return total


@njit(cache=True)
def residual_reachable(n, head, nxt, to, cap, source, eps):
    seen = np.zeros(n, dtype=np.bool_)
    stack = np.empty(n, dtype=np.int64)
    top = 0
    stack[top] = source
    top += 1
    seen[source] = True
    while top > 0:
        top -= 1
        u = stack[top]
        e = head[u]
        while e != -1:
            v = to[e]
            if not seen[v] and cap[e] > eps:
                seen[v] = True
                stack[top] = v
                top += 1
            e = nxt[e]
    return seen
