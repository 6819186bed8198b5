"""Pregeodesic flow: geodesics of g reparametrised by Euclidean arclength.

With a flat background the difference tensor T = nabla^g - nabla^R is just the
Christoffel array of g, and the unit-speed trace obeys
    x'' = (T(x',x').x') x' / |x'|^2 - T(x',x').
"""
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from . import _kernels as K
from .errors import SingularMetric, StepUnderflow
from .spacetime import CausalPath, TangentVector

COND_LIMIT = 1e12
RENORM_EVERY = 1000


@dataclass
class FlowState:
    v: TangentVector
    t: float = 0.0


def _christoffel_numpy(m, p, h):
    n = m.dim
    G = m.g_at(p)
    dG = np.empty((n, n, n))
    for c in range(n):
        e = np.zeros(n)
        e[c] = h
        dG[c] = (m.g_at(p + e) - m.g_at(p - e)) / (2 * h)
    Gi = np.linalg.inv(G)
    A = np.einsum("ilj->lij", dG) + np.einsum("jli->lij", dG) - dG
    return 0.5 * np.einsum("kl,lij->kij", Gi, A)


def christoffels(m, p):
    """(Gamma^g, Gamma^R, T) at p, each indexed [k, i, j]."""
    p = np.asarray(p, float)
    if not np.all(np.isfinite(p)):
        raise ValueError("point must be finite")
    G = m.g_at(p)
    if not np.isfinite(G).all() or np.linalg.cond(G) > COND_LIMIT:
        raise SingularMetric(f"metric at {p} is numerically singular")
    n = m.dim
    if m.compiled:
        Gam = np.empty((n, n, n))
        K.christoffel_at(m.kind, m.params, p, m.fd_step, Gam)
    else:
        Gam = _christoffel_numpy(m, p, m.fd_step)
    GR = np.zeros((n, n, n))
    return Gam, GR, Gam - GR


def conformal_christoffels(f, grad_f, p):
    """Closed form for f^2 times a constant-coefficient form eta = diag(-1,1,..)."""
    n = len(p)
    fv = float(f(p[None])[0])
    g = np.asarray(grad_f(p), float) / fv
    eta = np.eye(n)
    eta[0, 0] = -1.0
    Gam = np.zeros((n, n, n))
    for k in range(n):
        for i in range(n):
            for j in range(n):
                Gam[k, i, j] = ((k == i) * g[j] + (k == j) * g[i]
                                - eta[i, j] * eta[k, k] * g[k])
    return Gam


# ---------------------------------------------------------------- compiled integrators

@njit(cache=True)
def _contract(Gam, v, out):
    n = v.shape[0]
    for k in range(n):
        s = 0.0
        for i in range(n):
            for j in range(n):
                s += Gam[k, i, j] * v[i] * v[j]
        out[k] = s


@njit(cache=True)
def _rhs(kind, prm, h, x, v, pregeo, Gam, Tv, dx, dv):
    n = x.shape[0]
    K.christoffel_at(kind, prm, x, h, Gam)
    _contract(Gam, v, Tv)
    for i in range(n):
        dx[i] = v[i]
    if pregeo:
        vv = 0.0
        tv = 0.0
        for i in range(n):
            vv += v[i] * v[i]
            tv += Tv[i] * v[i]
        for i in range(n):
            dv[i] = tv / vv * v[i] - Tv[i]
    else:
        for i in range(n):
            dv[i] = -Tv[i]


@njit(cache=True)
def _finite_metric(kind, prm, x):
    n = x.shape[0]
    G = np.empty((n, n))
    o = np.empty(n)
    K.metric_at(kind, prm, x, G, o)
    d = np.linalg.det(G)
    return np.isfinite(d) and abs(d) > 1e-300


@njit(cache=True)
def _rk4(kind, prm, h, x0, v0, step, nsteps, pregeo, renorm, record):
    """Fixed-step RK4. Returns (X, V, S, status); S is Euclidean arclength."""
    n = x0.shape[0]
    nrec = nsteps // record + 1
    X = np.empty((nrec, n))
    V = np.empty((nrec, n))
    S = np.empty(nrec)
    x = x0.copy()
    v = v0.copy()
    speed0 = np.sqrt(np.sum(v0 * v0))
    Gam = np.empty((n, n, n))
    Tv = np.empty(n)
    k1x = np.empty(n); k1v = np.empty(n)
    k2x = np.empty(n); k2v = np.empty(n)
    k3x = np.empty(n); k3v = np.empty(n)
    k4x = np.empty(n); k4v = np.empty(n)
    xt = np.empty(n); vt = np.empty(n)
    s = 0.0
    X[0] = x
    V[0] = v
    S[0] = 0.0
    r = 1
    for it in range(1, nsteps + 1):
        _rhs(kind, prm, h, x, v, pregeo, Gam, Tv, k1x, k1v)
        for i in range(n):
            xt[i] = x[i] + 0.5 * step * k1x[i]
            vt[i] = v[i] + 0.5 * step * k1v[i]
        _rhs(kind, prm, h, xt, vt, pregeo, Gam, Tv, k2x, k2v)
        for i in range(n):
            xt[i] = x[i] + 0.5 * step * k2x[i]
            vt[i] = v[i] + 0.5 * step * k2v[i]
        _rhs(kind, prm, h, xt, vt, pregeo, Gam, Tv, k3x, k3v)
        for i in range(n):
            xt[i] = x[i] + step * k3x[i]
            vt[i] = v[i] + step * k3v[i]
        _rhs(kind, prm, h, xt, vt, pregeo, Gam, Tv, k4x, k4v)
        # Euclidean arclength of the step by Simpson on the speed
        sp0 = np.sqrt(np.sum(v * v))
        for i in range(n):
            x[i] += step / 6.0 * (k1x[i] + 2 * k2x[i] + 2 * k3x[i] + k4x[i])
            v[i] += step / 6.0 * (k1v[i] + 2 * k2v[i] + 2 * k3v[i] + k4v[i])
        sp1 = np.sqrt(np.sum(v * v))
        spm = 0.0
        for i in range(n):
            spm += (0.5 * (k2x[i] + k3x[i])) ** 2
        s += step / 6.0 * (sp0 + 4.0 * np.sqrt(spm) + sp1)
        if pregeo and renorm > 0 and it % renorm == 0:
            sc = speed0 / sp1
            for i in range(n):
                v[i] *= sc
        if not np.isfinite(x).all() or not np.isfinite(v).all():
            return X[:r], V[:r], S[:r], 1
        if it % record == 0:
            if not _finite_metric(kind, prm, x):
                return X[:r], V[:r], S[:r], 2
            X[r] = x
            V[r] = v
            S[r] = s
            r += 1
    return X[:r], V[:r], S[:r], 0


@njit(cache=True)
def _rkf45(kind, prm, h, x0, v0, t_end, step, tol, min_step, pregeo):
    """Adaptive Runge-Kutta-Fehlberg 4(5); status 3 on step underflow."""
    n = x0.shape[0]
    cap = 1024
    X = np.empty((cap, n))
    V = np.empty((cap, n))
    T = np.empty(cap)
    x = x0.copy()
    v = v0.copy()
    t = 0.0
    X[0] = x; V[0] = v; T[0] = 0.0
    r = 1
    a = np.array([0.0, 0.25, 3 / 8, 12 / 13, 1.0, 0.5])
    b = np.zeros((6, 5))
    b[1, 0] = 0.25
    b[2, 0] = 3 / 32; b[2, 1] = 9 / 32
    b[3, 0] = 1932 / 2197; b[3, 1] = -7200 / 2197; b[3, 2] = 7296 / 2197
    b[4, 0] = 439 / 216; b[4, 1] = -8.0; b[4, 2] = 3680 / 513; b[4, 3] = -845 / 4104
    b[5, 0] = -8 / 27; b[5, 1] = 2.0; b[5, 2] = -3544 / 2565; b[5, 3] = 1859 / 4104
    b[5, 4] = -11 / 40
    c4 = np.array([25 / 216, 0.0, 1408 / 2565, 2197 / 4104, -0.2, 0.0])
    c5 = np.array([16 / 135, 0.0, 6656 / 12825, 28561 / 56430, -9 / 50, 2 / 55])
    kx = np.empty((6, n))
    kv = np.empty((6, n))
    Gam = np.empty((n, n, n))
    Tv = np.empty(n)
    xt = np.empty(n); vt = np.empty(n)
    hstep = step
    while t < t_end:
        if hstep < min_step:
            return X[:r], V[:r], T[:r], 3
        hs = min(hstep, t_end - t)
        for st in range(6):
            for i in range(n):
                xt[i] = x[i]
                vt[i] = v[i]
                for j in range(st):
                    xt[i] += hs * b[st, j] * kx[j, i]
                    vt[i] += hs * b[st, j] * kv[j, i]
            _rhs(kind, prm, h, xt, vt, pregeo, Gam, Tv, kx[st], kv[st])
        err = 0.0
        for i in range(n):
            ex = 0.0
            ev = 0.0
            for st in range(6):
                ex += (c5[st] - c4[st]) * kx[st, i]
                ev += (c5[st] - c4[st]) * kv[st, i]
            err = max(err, abs(hs * ex), abs(hs * ev))
        if err <= tol or hs <= min_step:
            for i in range(n):
                for st in range(6):
                    x[i] += hs * c5[st] * kx[st, i]
                    v[i] += hs * c5[st] * kv[st, i]
            t += hs
            if r == X.shape[0]:
                X2 = np.empty((2 * r, n)); X2[:r] = X; X = X2
                V2 = np.empty((2 * r, n)); V2[:r] = V; V = V2
                T2 = np.empty(2 * r); T2[:r] = T; T = T2
            X[r] = x; V[r] = v; T[r] = t
            r += 1
        fac = 0.9 * (tol / max(err, 1e-300)) ** 0.2
        hstep = hs * min(4.0, max(0.1, fac))
    return X[:r], V[:r], T[:r], 0


# ---------------------------------------------------------------- python fallback

def _rk4_numpy(m, x0, v0, step, nsteps, pregeo, renorm, record):
    n = m.dim

    def rhs(x, v):
        Tv = np.einsum("kij,i,j->k", _christoffel_numpy(m, x, m.fd_step), v, v)
        if pregeo:
            return v, (Tv @ v) / (v @ v) * v - Tv
        return v, -Tv

    x, v = x0.copy(), v0.copy()
    speed0 = np.linalg.norm(v0)
    X, V, S = [x.copy()], [v.copy()], [0.0]
    s = 0.0
    for it in range(1, nsteps + 1):
        k1 = rhs(x, v)
        k2 = rhs(x + 0.5 * step * k1[0], v + 0.5 * step * k1[1])
        k3 = rhs(x + 0.5 * step * k2[0], v + 0.5 * step * k2[1])
        k4 = rhs(x + step * k3[0], v + step * k3[1])
        sp0 = np.linalg.norm(v)
        x = x + step / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
        v = v + step / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
        s += step / 6 * (sp0 + 4 * np.linalg.norm(0.5 * (k2[0] + k3[0])) + np.linalg.norm(v))
        if pregeo and renorm > 0 and it % renorm == 0:
            v *= speed0 / np.linalg.norm(v)
        if it % record == 0:
            X.append(x.copy()); V.append(v.copy()); S.append(s)
    return np.array(X), np.array(V), np.array(S), 0


def _start(m, v0):
    if isinstance(v0, TangentVector):
        x0, v = v0.base, v0.comp
    else:
        x0, v = v0
    x0 = np.asarray(x0, float).copy()
    v = np.asarray(v, float).copy()
    G = m.g_at(x0)
    if not np.isfinite(G).all() or np.linalg.cond(G) > COND_LIMIT:
        raise SingularMetric(f"metric at {x0} is numerically singular")
    return x0, v


def _check(status, where):
    if status == 1:
        raise SingularMetric(f"{where}: state became non-finite")
    if status == 2:
        raise SingularMetric(f"{where}: metric became singular")
    if status == 3:
        raise StepUnderflow(f"{where}: adaptive step fell below the minimum")


def integrate_pregeodesic(m, v0, t_span=10.0, step=1e-3, *, method="rk4", record=1,
                          renorm=RENORM_EVERY, tol=1e-12, min_step=1e-10):
    """Trace of the pregeodesic flow over Euclidean arclength [0, t_span].

    v0 is a TangentVector (or (base, comp)) with unit Euclidean norm.
    """
    x0, v = _start(m, v0)
    nv = np.linalg.norm(v)
    if abs(nv - 1.0) > 1e-12:
        raise ValueError(f"initial vector must have unit Euclidean norm, got {nv}")
    if method == "rk4":
        nsteps = int(round(t_span / step))
        if m.compiled:
            X, V, S, st = _rk4(m.kind, m.params, m.fd_step, x0, v, step, nsteps, True, renorm, record)
        else:
            X, V, S, st = _rk4_numpy(m, x0, v, step, nsteps, True, renorm, record)
        _check(st, "pregeodesic")
        t = np.arange(len(X)) * step * record
    elif method == "rkf45":
        if not m.compiled:
            raise ValueError("adaptive integration needs a compiled metric")
        X, V, t, st = _rkf45(m.kind, m.params, m.fd_step, x0, v, t_span, step, tol, min_step, True)
        _check(st, "pregeodesic")
    else:
        raise ValueError(f"unknown method {method!r}")
    return CausalPath(X, param=t, tangents=V,
                      meta={"renormalise_every": renorm if method == "rk4" else 0,
                            "step": step, "method": method})


def integrate_affine_geodesic(m, v0, tau_span=None, step=1e-3, *, arclength=None, record=1,
                              max_steps=10_000_000):
    """Plain geodesic equation in affine parameter; also tracks Euclidean arclength.

    Integrates until tau_span, or until the accumulated arclength reaches
    `arclength` when that is given. meta['arclength'] holds the arclength at
    each recorded point.
    """
    x0, v = _start(m, v0)
    if tau_span is None and arclength is None:
        raise ValueError("give tau_span or arclength")
    if tau_span is not None:
        nsteps = int(round(tau_span / step))
    else:
        nsteps = int(np.ceil(arclength / (np.linalg.norm(v) * step) * 1.5)) + 10
    nsteps = min(nsteps, max_steps)
    while True:
        if m.compiled:
            X, V, S, st = _rk4(m.kind, m.params, m.fd_step, x0, v, step, nsteps, False, 0, record)
        else:
            X, V, S, st = _rk4_numpy(m, x0, v, step, nsteps, False, 0, record)
        _check(st, "affine geodesic")
        if arclength is None or S[-1] >= arclength or nsteps >= max_steps:
            break
        nsteps = min(2 * nsteps, max_steps)
    if arclength is not None:
        cut = int(np.searchsorted(S, arclength)) + 2
        X, V, S = X[:cut], V[:cut], S[:cut]
    tau = np.arange(len(X)) * step * record
    return CausalPath(X, param=tau, tangents=V, meta={"arclength": S, "step": step})


def hermite_at(path, s_query, s=None):
    """Cubic Hermite interpolation of a traced curve in the parameter s.

    Tangents are taken with respect to s (rescaled from the stored ones).
    """
    s = path.param if s is None else s
    X, V = path.vertices, path.tangents
    if s is not path.param:
        # convert d/dtau to d/ds using ds/dtau = |V|
        V = V / np.linalg.norm(V, axis=1, keepdims=True)
    i = np.clip(np.searchsorted(s, s_query) - 1, 0, len(s) - 2)
    h = s[i + 1] - s[i]
    u = ((s_query - s[i]) / h)[:, None]
    h = h[:, None]
    h00 = 2 * u ** 3 - 3 * u ** 2 + 1
    h10 = u ** 3 - 2 * u ** 2 + u
    h01 = -2 * u ** 3 + 3 * u ** 2
    h11 = u ** 3 - u ** 2
    return h00 * X[i] + h10 * h * V[i] + h01 * X[i + 1] + h11 * h * V[i + 1]


def oracle_distance(m, v0, t_span=5.0, step=1e-3):
    """Sup distance between the pregeodesic trace and the reparametrised affine geodesic."""
    pre = integrate_pregeodesic(m, v0, t_span, step)
    aff = integrate_affine_geodesic(m, v0, step=step, arclength=t_span)
    S = aff.meta["arclength"]
    t = pre.param
    t = t[t <= S[-1]]
    Y = hermite_at(aff, t, s=S)
    return float(np.max(np.linalg.norm(pre.vertices[:len(t)] - Y, axis=1)))


def speed_drift(path):
    return float(np.max(np.abs(np.linalg.norm(path.tangents, axis=1) - 1.0)))


def causal_character(m, path):
    """g(x', x') along a traced curve."""
    G, _ = m.forms(path.vertices)
    return np.einsum("mi,mij,mj->m", path.tangents, G, path.tangents)


def flow_map(m, v0, t, step=1e-3):
    """Phi(v0, t): final tangent vector after Euclidean arclength t."""
    p = integrate_pregeodesic(m, v0, t, step, renorm=0)
    return TangentVector(p.vertices[-1], p.tangents[-1])
