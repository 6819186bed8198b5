"""Compiled pieces of the longest-path solver: region enumeration and DP sweeps."""
import math

import numpy as np
from numba import njit

from ._kernels import segment_length_buf


@njit(cache=True)
def _seg_dist2(p, a, b):
    n = p.shape[0]
    ab2 = 0.0
    t = 0.0
    for i in range(n):
        ab2 += (b[i] - a[i]) ** 2
        t += (p[i] - a[i]) * (b[i] - a[i])
    if ab2 > 0.0:
        t = min(1.0, max(0.0, t / ab2))
    else:
        t = 0.0
    d = 0.0
    for i in range(n):
        d += (p[i] - a[i] - t * (b[i] - a[i])) ** 2
    return d


@njit(cache=True)
def region_keys(A, B, radius, temporal, tlo, thi, kept, lo, strides, tmin, out, fill):
    """Enumerate lattice points within `radius` of any segment A[s]->B[s].

    Coordinates are in grid units. Points outside the temporal slab [tlo, thi]
    are skipped. Returns the count; writes keys into `out` when fill is True.
    """
    ns, n = A.shape
    r2 = radius * radius
    cnt = 0
    lower = np.empty(n, np.int64)
    upper = np.empty(n, np.int64)
    u = np.empty(n, np.int64)
    p = np.empty(n)
    nk = kept.shape[0]
    for s in range(ns):
        for i in range(n):
            lower[i] = int(math.floor(min(A[s, i], B[s, i]) - radius))
            upper[i] = int(math.ceil(max(A[s, i], B[s, i]) + radius))
            u[i] = lower[i]
        done = False
        while not done:
            t = 0
            for i in range(n):
                t += temporal[i] * u[i]
            if t >= tlo and t <= thi:
                for i in range(n):
                    p[i] = u[i]
                if _seg_dist2(p, A[s], B[s]) <= r2:
                    if fill:
                        key = (t - tmin) * strides[0]
                        for m in range(nk):
                            key += (u[kept[m]] - lo[m]) * strides[m + 1]
                        out[cnt] = key
                    cnt += 1
            # odometer increment, last axis fastest
            i = n - 1
            while i >= 0:
                u[i] += 1
                if u[i] <= upper[i]:
                    break
                u[i] = lower[i]
                i -= 1
            if i < 0:
                done = True
    return cnt


@njit(cache=True)
def dedupe_sorted(a):
    n = a.shape[0]
    if n == 0:
        return 0
    j = 0
    for i in range(1, n):
        if a[i] != a[j]:
            j += 1
            a[j] = a[i]
    return j + 1


@njit(cache=True)
def decode(key, temporal, elim, kept, lo, strides, tmin, u):
    nk = kept.shape[0]
    rem = key
    t = rem // strides[0] + tmin
    rem = rem % strides[0]
    acc = 0
    for m in range(nk):
        c = rem // strides[m + 1] + lo[m]
        rem = rem % strides[m + 1]
        u[kept[m]] = c
        acc += temporal[kept[m]] * c
    u[elim] = (t - acc) * temporal[elim]


@njit(cache=True)
def decode_all(keys, temporal, elim, kept, lo, strides, tmin, n):
    N = keys.shape[0]
    U = np.empty((N, n), np.int64)
    for a in range(N):
        decode(keys[a], temporal, elim, kept, lo, strides, tmin, U[a])
    return U


@njit(nogil=True, cache=True)
def dp_sweep(keys, src, stop, offsets, stencil, kind, prm, origin, spacing, margin, rule,
             temporal, elim, kept, lo, strides, tmin, values, pred):
    """Longest paths from node `src` to every later node, pull formulation.

    Nodes are processed in key order, which is topological because every
    stencil vector raises the temporal index. Ties keep the first stencil in
    order, i.e. the predecessor with the smallest key.
    """
    N = keys.shape[0]
    S, n = stencil.shape
    ptr = np.full(S, src, np.int64)
    u = np.empty(n, np.int64)
    xa = np.empty(n)
    xb = np.empty(n)
    dbuf = np.empty(n)
    mbuf = np.empty(n)
    G = np.empty((n, n))
    o = np.empty(n)
    values[src] = 0.0
    pred[src] = -1
    last = min(stop, N - 1)
    for a in range(src + 1, last + 1):
        ka = keys[a]
        best = -np.inf
        bp = -1
        have_x = False
        for s in range(S):
            target = ka - offsets[s]
            p = ptr[s]
            while p < a and keys[p] < target:
                p += 1
            ptr[s] = p
            if p >= a or keys[p] != target:
                continue
            vu = values[p]
            if vu == -np.inf:
                continue
            if not have_x:
                decode(ka, temporal, elim, kept, lo, strides, tmin, u)
                for i in range(n):
                    xb[i] = origin[i] + spacing * u[i]
                have_x = True
            for i in range(n):
                xa[i] = origin[i] + spacing * (u[i] - stencil[s, i])
            w = segment_length_buf(kind, prm, xa, xb, rule, margin, dbuf, mbuf, G, o)
            if w < 0.0:
                continue
            c = vu + w
            if c > best:
                best = c
                bp = s
        values[a] = best
        pred[a] = bp


@njit(nogil=True, cache=True)
def dp_sweep_weighted(keys, src, lo_idx, hi_idx, offsets, W, values, pred, ptr):
    """Same recursion with precomputed edge weights W[a - lo_idx, s] (negative = no edge).

    Called chunk by chunk; `ptr` carries the merge pointers between chunks.
    """
    S = offsets.shape[0]
    for a in range(lo_idx, hi_idx):
        if a <= src:
            continue
        ka = keys[a]
        best = -np.inf
        bp = -1
        for s in range(S):
            target = ka - offsets[s]
            p = ptr[s]
            while p < a and keys[p] < target:
                p += 1
            ptr[s] = p
            if p >= a or keys[p] != target:
                continue
            vu = values[p]
            w = W[a - lo_idx, s]
            if vu == -np.inf or w < 0.0:
                continue
            c = vu + w
            if c > best:
                best = c
                bp = s
        values[a] = best
        pred[a] = bp


@njit(cache=True)
def trace_back(keys, idx, pred, offsets):
    """Node indices of the optimal path ending at idx, source first."""
    out = [idx]
    a = idx
    while pred[a] >= 0:
        target = keys[a] - offsets[pred[a]]
        a = np.searchsorted(keys[:a], target)
        out.append(a)
    res = np.empty(len(out), np.int64)
    for i in range(len(out)):
        res[i] = out[len(out) - 1 - i]
    return res
