"""Compiled metric evaluation shared by the graph solver, the flow and the samplers.

Every shipped metric family is identified by an integer kind plus a flat float
parameter vector, so the compiled loops can evaluate it without Python calls.
"""
import math

import numpy as np
from numba import njit

CONST = 0
CONFORMAL = 1
HEDLUND = 2
BOUNDARY2 = 3
CUSTOM = -1

SQRT3 = math.sqrt(3.0)
TWO_PI = 2.0 * math.pi


@njit(cache=True)
def bump(t):
    # exp(1 - 1/(1-t^2)) on [0,1), zero beyond; equals 1 at t = 0
    if t >= 1.0:
        return 0.0
    return math.exp(1.0 - 1.0 / (1.0 - t * t))


@njit(cache=True)
def _frac(x):
    return x - np.floor(x + 0.5)


@njit(cache=True)
def line_distances(x):
    """Euclidean distances from x to the three line families of the tube system."""
    a = _frac(x[1])
    b = _frac(x[2])
    d0 = math.sqrt(a * a + b * b)
    a = _frac(x[0])
    b = _frac(x[2] - 0.5)
    d1 = math.sqrt(a * a + b * b)
    a = _frac(x[0] - 0.5)
    b = _frac(x[1] - 0.5)
    d2 = math.sqrt(a * a + b * b)
    return d0, d1, d2


@njit(cache=True)
def hedlund_base_form(eps, G):
    # -(eps^2/4) v1 v1^T + (I - v1 v1^T) with v1 = (1,1,1)/sqrt3
    c = -(eps * eps / 4.0) / 3.0 - 1.0 / 3.0
    for i in range(3):
        for j in range(3):
            G[i, j] = c
        G[i, i] += 1.0


@njit(cache=True)
def hedlund_line_form(lam, i, G):
    for a in range(3):
        for b in range(3):
            G[a, b] = 0.0
        G[a, a] = lam * lam / 3.0
    G[i, i] = -lam * lam


@njit(cache=True)
def conformal_factor(prm, x):
    """f(x) = c0 + sum_m a_m cos(2 pi k_m.x + phi_m) and its gradient."""
    n = x.shape[0]
    f = prm[0]
    nm = int(prm[1])
    grad = np.zeros(n)
    pos = 2
    for _ in range(nm):
        arg = prm[pos + n + 1]
        for c in range(n):
            arg += TWO_PI * prm[pos + c] * x[c]
        amp = prm[pos + n]
        f += amp * math.cos(arg)
        s = -amp * math.sin(arg)
        for c in range(n):
            grad[c] += s * TWO_PI * prm[pos + c]
        pos += n + 2
    return f, grad


@njit(cache=True)
def metric_at(kind, prm, x, G, o):
    """Fill G with the Lorentzian form at x and o with the future reference vector."""
    n = x.shape[0]
    if kind == CONST:
        for i in range(n):
            for j in range(n):
                G[i, j] = prm[i * n + j]
            o[i] = prm[n * n + i]
    elif kind == CONFORMAL:
        f, _ = conformal_factor(prm, x)
        f2 = f * f
        for i in range(n):
            for j in range(n):
                G[i, j] = 0.0
            G[i, i] = f2
            o[i] = 0.0
        G[0, 0] = -f2
        o[0] = 1.0
    elif kind == HEDLUND:
        eps = prm[3]
        peak = prm[4]
        d0, d1, d2 = line_distances(x)
        hedlund_base_form(eps, G)
        for i in range(3):
            di = d0 if i == 0 else (d1 if i == 1 else d2)
            if di < eps:
                w = peak * bump(di / eps)
                lam = prm[i]
                for a in range(3):
                    for b in range(3):
                        G[a, b] *= 1.0 - w
                    G[a, a] += w * lam * lam / 3.0
                G[i, i] -= w * lam * lam * (4.0 / 3.0)
                break
        s = 1.0 / SQRT3
        o[0] = s
        o[1] = s
        o[2] = s
    elif kind == BOUNDARY2:
        sx = math.sin(math.pi * x[0]) ** 2
        sy = math.sin(math.pi * x[1]) ** 2
        # frame X1 = (-sx, 1), X2 = (1, sy); coframe rows of the inverse
        det = -sx * sy - 1.0
        s1x = sy / det
        s1y = -1.0 / det
        s2x = -1.0 / det
        s2y = -sx / det
        G[0, 0] = -4.0 * s1x * s2x
        G[1, 1] = -4.0 * s1y * s2y
        G[0, 1] = -2.0 * (s1x * s2y + s2x * s1y)
        G[1, 0] = G[0, 1]
        o[0] = 1.0 - sx
        o[1] = 1.0 + sy


@njit(cache=True)
def metric_deriv(kind, prm, x, dG, h):
    """dG[c, a, b] = d/dx^c of G[a, b]."""
    n = x.shape[0]
    if kind == CONST:
        for c in range(n):
            for a in range(n):
                for b in range(n):
                    dG[c, a, b] = 0.0
        return
    if kind == CONFORMAL:
        f, grad = conformal_factor(prm, x)
        for c in range(n):
            for a in range(n):
                for b in range(n):
                    dG[c, a, b] = 0.0
            for a in range(n):
                dG[c, a, a] = 2.0 * f * grad[c]
            dG[c, 0, 0] = -dG[c, 0, 0]
        return
    Gp = np.empty((n, n))
    Gm = np.empty((n, n))
    o = np.empty(n)
    y = x.copy()
    for c in range(n):
        y[c] = x[c] + h
        metric_at(kind, prm, y, Gp, o)
        y[c] = x[c] - h
        metric_at(kind, prm, y, Gm, o)
        y[c] = x[c]
        for a in range(n):
            for b in range(n):
                dG[c, a, b] = (Gp[a, b] - Gm[a, b]) / (2.0 * h)


@njit(cache=True)
def metric_batch(kind, prm, X):
    m, n = X.shape
    G = np.empty((m, n, n))
    O = np.empty((m, n))
    for i in range(m):
        metric_at(kind, prm, X[i], G[i], O[i])
    return G, O


@njit(cache=True)
def quad(G, u, v):
    n = u.shape[0]
    s = 0.0
    for i in range(n):
        for j in range(n):
            s += G[i, j] * u[i] * v[j]
    return s


@njit(cache=True)
def needs_simpson(kind, prm, mid, seglen):
    # steep blending region of the tube system
    if kind != HEDLUND:
        return False
    d0, d1, d2 = line_distances(mid)
    lim = prm[3] + seglen
    return d0 < lim or d1 < lim or d2 < lim


@njit(cache=True)
def segment_length_buf(kind, prm, a, b, rule, margin, d, mid, G, o):
    """Lorentzian length of the straight segment a->b using caller buffers.

    Returns -1.0 when the segment is not future causal at its midpoint under
    the given margin. rule: 0 midpoint, 1 Simpson, 2 Simpson only near tubes.
    """
    n = a.shape[0]
    for i in range(n):
        d[i] = b[i] - a[i]
        mid[i] = 0.5 * (a[i] + b[i])
    metric_at(kind, prm, mid, G, o)
    qm = quad(G, d, d)
    nn = 0.0
    for i in range(n):
        nn += d[i] * d[i]
    if nn == 0.0:
        return 0.0
    if qm > margin * nn:
        return -1.0
    if quad(G, d, o) >= 0.0:
        return -1.0
    fm = math.sqrt(max(0.0, -qm))
    use_simpson = rule == 1 or (rule == 2 and needs_simpson(kind, prm, mid, math.sqrt(nn)))
    if not use_simpson:
        return fm
    metric_at(kind, prm, a, G, o)
    fa = math.sqrt(max(0.0, -quad(G, d, d)))
    metric_at(kind, prm, b, G, o)
    fb = math.sqrt(max(0.0, -quad(G, d, d)))
    return (fa + 4.0 * fm + fb) / 6.0


@njit(cache=True)
def segment_length(kind, prm, a, b, rule, margin):
    n = a.shape[0]
    return segment_length_buf(kind, prm, a, b, rule, margin, np.empty(n), np.empty(n),
                              np.empty((n, n)), np.empty(n))


@njit(cache=True)
def polyline_lengths(kind, prm, V, rule, margin):
    m, n = V.shape
    out = np.empty(max(m - 1, 0))
    d = np.empty(n)
    mid = np.empty(n)
    G = np.empty((n, n))
    o = np.empty(n)
    for i in range(m - 1):
        out[i] = segment_length_buf(kind, prm, V[i], V[i + 1], rule, margin, d, mid, G, o)
    return out


@njit(cache=True)
def christoffel_at(kind, prm, x, h, Gam):
    """Gam[k, i, j] of the Levi-Civita connection."""
    n = x.shape[0]
    G = np.empty((n, n))
    o = np.empty(n)
    dG = np.empty((n, n, n))
    metric_at(kind, prm, x, G, o)
    metric_deriv(kind, prm, x, dG, h)
    Gi = np.linalg.inv(G)
    for k in range(n):
        for i in range(n):
            for j in range(n):
                s = 0.0
                for l in range(n):
                    s += Gi[k, l] * (dG[i, l, j] + dG[j, l, i] - dG[l, i, j])
                Gam[k, i, j] = 0.5 * s


@njit(cache=True)
def pair_lengths(kind, prm, A, B, rule, margin):
    m, n = A.shape
    out = np.empty(m)
    d = np.empty(n)
    mid = np.empty(n)
    G = np.empty((n, n))
    o = np.empty(n)
    for i in range(m):
        out[i] = segment_length_buf(kind, prm, A[i], B[i], rule, margin, d, mid, G, o)
    return out
