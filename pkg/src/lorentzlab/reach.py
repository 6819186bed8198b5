"""Time separation on the cover as a longest path in a layered grid DAG.

Nodes are lattice points origin + spacing*u. Each node is stored as one int64
key built from its temporal index t = tau.u and all coordinates but one, so
sorting by key is a topological order and predecessors are found by merging.
"""
import csv
import math
import warnings
from dataclasses import dataclass, field
from itertools import product

import numpy as np
from scipy.optimize import minimize_scalar

from . import _graph as GK
from . import _kernels as K
from .errors import EmptyStencil, StalledRefinement
from .spacetime import (EDGE_MARGIN, VALIDATION_MARGIN, _RULES, CausalPath, pair_lengths,
                        segment_lengths, tube_distances)


def make_stencil(temporal, k):
    """Primitive integer vectors with max-norm <= k and positive temporal increment."""
    temporal = np.asarray(temporal, np.int64)
    n = len(temporal)
    out = []
    for s in product(range(-k, k + 1), repeat=n):
        s = np.array(s, np.int64)
        if temporal @ s <= 0:
            continue
        if math.gcd(*[int(abs(c)) for c in s]) != 1:
            continue
        out.append(s)
    return np.array(out, np.int64).reshape(-1, n)


def default_stencil_k(m):
    return int(m.meta.get("stencil_k", 5))


@dataclass
class CausalGraph:
    """Lattice region with its stencil; nodes are sorted int64 keys."""

    metric: object
    origin: np.ndarray
    spacing: float
    stencil: np.ndarray
    offsets: np.ndarray
    keys: np.ndarray
    elim: int
    kept: np.ndarray
    lo: np.ndarray
    strides: np.ndarray
    tmin: int
    region: dict
    margin: float = EDGE_MARGIN
    rule: str = "auto"

    @property
    def temporal(self):
        return self.metric.temporal

    @property
    def n_nodes(self):
        return int(len(self.keys))

    def _dec(self):
        return (self.temporal, self.elim, self.kept, self.lo, self.strides, self.tmin)

    def grid_coords(self, idx=None):
        keys = self.keys if idx is None else self.keys[np.atleast_1d(idx)]
        return GK.decode_all(keys, *self._dec(), self.metric.dim)

    def points(self, idx=None):
        return self.origin + self.spacing * self.grid_coords(idx)

    def key_of(self, u):
        u = np.asarray(u, np.int64)
        t = int(self.temporal @ u)
        key = (t - self.tmin) * self.strides[0]
        for mm, ax in enumerate(self.kept):
            key += (int(u[ax]) - int(self.lo[mm])) * int(self.strides[mm + 1])
        return int(key)

    def index_of(self, u):
        """Node index of the grid point u, or -1 if it is not in the region."""
        u = np.asarray(u, np.int64)
        digits = [int(self.temporal @ u) - self.tmin] + [int(u[ax]) - int(self.lo[mm])
                                                        for mm, ax in enumerate(self.kept)]
        widths = self.region["widths"]
        if any(d < 0 or d >= w for d, w in zip(digits, widths)):
            return -1
        key = self.key_of(u)
        i = int(np.searchsorted(self.keys, key))
        return i if i < len(self.keys) and self.keys[i] == key else -1

    def layers(self):
        """(t, start, stop) node index ranges per temporal level."""
        t = self.keys // self.strides[0] + self.tmin
        cut = np.flatnonzero(np.diff(t)) + 1
        starts = np.concatenate([[0], cut])
        stops = np.concatenate([cut, [len(t)]])
        return [(int(t[a]), int(a), int(b)) for a, b in zip(starts, stops)]


def _grid_of(point, origin, spacing):
    c = (np.asarray(point, float) - origin) / spacing
    r = np.rint(c)
    on = bool(np.all(np.abs(c - r) < 1e-9))
    return c, r.astype(np.int64), on


def build_graph(m, p, q=None, spacing=0.02, stencil_k=None, region_mode="diamond", *,
                guide=None, radius=None, c_bound=1.0, margin=EDGE_MARGIN, rule="auto",
                t_extra=0, check_samples=256):
    """Lattice DAG rooted at p.

    diamond: points within c_bound*|q-p| of the chord p->q, between the
    temporal levels of p and q. tube: points within `radius` of the guide
    polyline(s). ball: points within `radius` of p at or after p's level.
    """
    n = m.dim
    p = np.asarray(p, float)
    origin = p.copy()
    tau = m.temporal
    if stencil_k is None:
        stencil_k = default_stencil_k(m)
    stencil = make_stencil(tau, stencil_k)
    unit = np.flatnonzero(np.abs(tau) == 1)
    if unit.size == 0:
        raise ValueError("temporal covector needs a component equal to +-1")
    elim = int(unit[0])
    kept = np.array([i for i in range(n) if i != elim], np.int64)

    if region_mode == "diamond":
        if q is None:
            raise ValueError("diamond mode needs q")
        q = np.asarray(q, float)
        segs = [np.vstack([p, q])]
        rad = c_bound * float(np.linalg.norm(q - p))
    elif region_mode == "tube":
        if guide is None or radius is None:
            raise ValueError("tube mode needs a guide and a radius")
        if isinstance(guide, np.ndarray) and guide.ndim == 2:
            guide = [guide]
        segs = [np.asarray(g.vertices if isinstance(g, CausalPath) else g, float) for g in guide]
        rad = float(radius)
    elif region_mode == "ball":
        if radius is None:
            raise ValueError("ball mode needs a radius")
        segs = [np.vstack([p, p])]
        rad = float(radius)
    else:
        raise ValueError(f"unknown region mode {region_mode!r}")

    A = np.vstack([(s[:-1] - origin) / spacing for s in segs])
    B = np.vstack([(s[1:] - origin) / spacing for s in segs])
    r_u = rad / spacing
    allpts = np.vstack([A, B])
    if q is not None:
        tq = float(tau @ ((np.asarray(q, float) - origin) / spacing))
        thi = int(math.floor(tq + 1e-9)) + int(t_extra)
    else:
        thi = int(math.ceil(float((allpts @ tau).max()) + r_u * np.abs(tau).sum()))
    thi = max(thi, 0)
    tlo = 0
    kmax = int(np.abs(stencil).max()) if len(stencil) else 0
    smax = int((stencil @ tau).max()) if len(stencil) else 1
    tmin = tlo - smax
    lo = np.floor(allpts[:, kept].min(axis=0) - r_u).astype(np.int64) - kmax - 1
    hi = np.ceil(allpts[:, kept].max(axis=0) + r_u).astype(np.int64) + kmax + 1
    widths = [thi - tmin + 1] + list((hi - lo + 1).astype(int))
    strides = np.ones(n, np.int64)
    for i in range(n - 2, -1, -1):
        strides[i] = strides[i + 1] * widths[i + 1]
    if float(strides[0]) * widths[0] > 2 ** 62:
        raise ValueError("region too large for 64-bit node keys")

    cnt = GK.region_keys(A, B, r_u, tau, tlo, thi, kept, lo, strides, tmin,
                         np.empty(0, np.int64), False)
    keys = np.empty(cnt, np.int64)
    GK.region_keys(A, B, r_u, tau, tlo, thi, kept, lo, strides, tmin, keys, True)
    keys.sort()
    keys = keys[:GK.dedupe_sorted(keys)].copy()

    offsets = (stencil @ tau) * strides[0] + stencil[:, kept] @ strides[1:]
    order = np.argsort(-offsets, kind="stable")
    stencil, offsets = stencil[order], offsets[order]

    g = CausalGraph(m, origin, float(spacing), stencil, offsets.astype(np.int64), keys, elim,
                    kept, lo, strides, int(tmin),
                    {"mode": region_mode, "radius": rad, "guide": segs, "tlo": tlo, "thi": thi,
                     "widths": widths, "stencil_k": stencil_k},
                    margin, rule)
    _check_stencil(g, check_samples)
    return g


def _check_stencil(g, samples):
    """EmptyStencil unless some stencil direction is future causal somewhere in the region."""
    m = g.metric
    if g.n_nodes == 0 or len(g.stencil) == 0:
        raise EmptyStencil("region or stencil is empty")
    idx = np.unique(np.linspace(0, g.n_nodes - 1, min(samples, g.n_nodes)).astype(np.int64))
    P = g.points(idx)
    S = len(g.stencil)
    A = np.repeat(P, S, axis=0)
    B = A + g.spacing * np.tile(g.stencil, (len(P), 1))
    if np.any(pair_lengths(m, A, B, "midpoint", g.margin) >= 0):
        return
    # a guide point on the metric's special set may be the only admissible place
    extra = np.vstack(g.region["guide"])
    A = np.repeat(extra, S, axis=0)
    B = A + g.spacing * np.tile(g.stencil, (len(extra), 1))
    if np.any(pair_lengths(m, A, B, "midpoint", g.margin) >= 0):
        return
    raise EmptyStencil("no stencil direction is future causal in the region")


@dataclass
class DPResult:
    graph: CausalGraph
    source: int
    values: np.ndarray
    pred: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def reachable(self):
        return np.isfinite(self.values)

    def path_to(self, idx):
        g = self.graph
        if not np.isfinite(self.values[idx]):
            return CausalPath(np.empty((0, g.metric.dim)))
        nodes = GK.trace_back(g.keys, int(idx), self.pred, g.offsets)
        return CausalPath(g.points(nodes), meta={"nodes": nodes})

    def value_at(self, point):
        """Graph value at a lattice point, with 0 for unreachable or absent points."""
        g = self.graph
        _, u, on = _grid_of(point, g.origin, g.spacing)
        i = g.index_of(u) if on else -1
        if i < 0 or not np.isfinite(self.values[i]):
            return 0.0
        return float(self.values[i])

    def connect(self, q, window=None):
        """Best value at q, allowing a final straight connector from a nearby node."""
        g = self.graph
        q = np.asarray(q, float)
        c, u, on = _grid_of(q, g.origin, g.spacing)
        if on:
            i = g.index_of(u)
            if i >= 0 and np.isfinite(self.values[i]):
                return float(self.values[i]), self.path_to(i)
        k = window if window is not None else int(g.region.get("stencil_k", 1))
        k = max(k, 1)
        base = np.floor(c).astype(np.int64)
        cands = []
        for off in product(range(-k, k + 2), repeat=g.metric.dim):
            i = g.index_of(base + np.array(off))
            if i >= 0 and np.isfinite(self.values[i]):
                cands.append(i)
        if not cands:
            return 0.0, CausalPath(np.empty((0, g.metric.dim)))
        cands = np.array(sorted(set(cands)))
        P = g.points(cands)
        w = pair_lengths(g.metric, P, np.broadcast_to(q, P.shape), g.rule, VALIDATION_MARGIN)
        tot = np.where(w >= 0, self.values[cands] + w, -np.inf)
        j = int(np.argmax(tot))
        if not np.isfinite(tot[j]):
            return 0.0, CausalPath(np.empty((0, g.metric.dim)))
        path = self.path_to(cands[j])
        return float(tot[j]), CausalPath(np.vstack([path.vertices, q]))


def run_dp(g, source=None):
    """Longest-path values from the source node (default: the origin) to all nodes."""
    m = g.metric
    src = g.index_of(np.zeros(m.dim, np.int64)) if source is None else int(source)
    if src < 0:
        raise ValueError("source is not a node of the graph")
    N = g.n_nodes
    values = np.full(N, -np.inf)
    pred = np.full(N, -1, np.int16)
    if m.compiled:
        GK.dp_sweep(g.keys, src, N - 1, g.offsets, g.stencil, m.kind, m.params, g.origin,
                    g.spacing, g.margin, _RULES[g.rule], m.temporal, g.elim, g.kept, g.lo,
                    g.strides, g.tmin, values, pred)
    else:
        values[src] = 0.0
        ptr = np.full(len(g.offsets), src, np.int64)
        S = len(g.stencil)
        for t, a, b in g.layers():
            if b <= src:
                continue
            P = g.points(np.arange(a, b))
            B = np.repeat(P, S, axis=0)
            A = B - g.spacing * np.tile(g.stencil, (len(P), 1))
            W = pair_lengths(m, A, B, g.rule, g.margin).reshape(len(P), S)
            GK.dp_sweep_weighted(g.keys, src, a, b, g.offsets, W, values, pred, ptr)
    return DPResult(g, src, values, pred)


def time_separation(m, p, q, spacing=0.02, stencil_k=None, region_mode="diamond", *,
                    refine=0, return_result=False, **opts):
    """Lower estimate of d(p,q) and the argmax path (0 and an empty path if unreachable)."""
    g = build_graph(m, p, q, spacing, stencil_k, region_mode, **opts)
    res = run_dp(g)
    d, path = res.connect(q)
    if refine and len(path) > 2:
        path = refine_maximizer(m, path.simplified(), refine, step=spacing)
        d = max(d, float(segment_lengths(m, path.vertices, g.rule, VALIDATION_MARGIN).sum()))
    path.meta.update({"n_nodes": g.n_nodes, "spacing": spacing})
    if return_result:
        return d, path, res
    return d, path


# ---------------------------------------------------------------- refinement

def _local_len(m, a, v, b, rule):
    w = pair_lengths(m, np.vstack([a, v]), np.vstack([v, b]), rule, VALIDATION_MARGIN)
    if np.any(w < 0):
        return -np.inf
    return float(w.sum())


def refine_maximizer(m, path, iterations=20, step=None, rule="auto", min_gain=1e-12,
                     fixed=None):
    """Coordinate ascent on interior vertices; total length never decreases.

    Each coordinate moves at most `step` per sweep. `fixed` is an optional
    boolean mask of vertices that must not move.
    """
    V = np.array(path.vertices, float)
    nv = len(V)
    if step is None:
        step = float(np.median(np.linalg.norm(np.diff(V, axis=0), axis=1))) if nv > 1 else 0.0
    fixed = np.zeros(nv, bool) if fixed is None else np.asarray(fixed, bool)
    seg = segment_lengths(m, V, rule, VALIDATION_MARGIN)
    if np.any(seg < 0):
        raise ValueError("path is not causal")
    history = [float(seg.sum())]
    stalled = False
    for _ in range(iterations):
        for i in range(1, nv - 1):
            if fixed[i]:
                continue
            for c in range(m.dim):
                base = _local_len(m, V[i - 1], V[i], V[i + 1], rule)
                x0 = V[i, c]

                def neg(x):
                    v = V[i].copy()
                    v[c] = x
                    L = _local_len(m, V[i - 1], v, V[i + 1], rule)
                    return 1e6 if not np.isfinite(L) else -L

                r = minimize_scalar(neg, bounds=(x0 - step, x0 + step), method="bounded",
                                    options={"xatol": step * 1e-6})
                if -r.fun > base:
                    V[i, c] = r.x
        total = float(segment_lengths(m, V, rule, VALIDATION_MARGIN).sum())
        gain = total - history[-1]
        history.append(total)
        if gain < min_gain:
            stalled = True
            warnings.warn(StalledRefinement(f"gain {gain:.3e} below {min_gain:.0e}"))
            break
    return CausalPath(V, meta={"history": history, "stalled": stalled})


# ---------------------------------------------------------------- output

def path_table(m, path):
    """Rows (t, x1..xn, is_in_tube, local sqrt|g|) for a path."""
    V = path.vertices
    if len(V) == 0:
        return np.empty((0, m.dim + 3))
    t = V @ m.temporal
    if len(V) > 1:
        d = np.diff(V, axis=0)
        d = np.vstack([d, d[-1:]])
    else:
        d = np.zeros_like(V)
    nrm = np.linalg.norm(d, axis=1)
    u = np.divide(d, nrm[:, None], out=np.zeros_like(d), where=nrm[:, None] > 0)
    G, _ = m.forms(V)
    local = np.sqrt(np.abs(np.einsum("mi,mij,mj->m", u, G, u)))
    if m.kind == K.HEDLUND:
        tube = (tube_distances(V).min(axis=1) < m.params[3]).astype(float)
    else:
        tube = np.zeros(len(V))
    return np.column_stack([t, V, tube, local])


def write_path_csv(m, path, fname):
    rows = path_table(m, path)
    with open(fname, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t"] + [f"x{i + 1}" for i in range(m.dim)] + ["is_in_tube", "local_sqrt_g"])
        for r in rows:
            w.writerow([repr(float(x)) for x in r])
    return fname


# ---------------------------------------------------------------- diagnostics

@dataclass
class DiagnosticsConstants:
    """Empirical fits of the existence constants, each as (value, (low, high))."""

    C_causal: tuple
    std_burago: tuple
    err_cone: tuple
    Cbar: tuple
    K_cone: tuple
    Lc: tuple
    violations: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def as_dict(self):
        keys = ("C_causal", "std_burago", "err_cone", "Cbar", "K_cone", "Lc")
        out = {k: {"value": getattr(self, k)[0], "window": list(getattr(self, k)[1])} for k in keys}
        out["violations"] = self.violations
        return out


def _bootstrap_max(x, rng, reps=200):
    x = np.asarray(x, float)
    if x.size == 0:
        return 0.0, (0.0, 0.0)
    v = float(x.max())
    b = np.array([x[rng.integers(0, x.size, x.size)].max() for _ in range(reps)])
    return v, (float(np.quantile(b, 0.05)), v)


def cone_distance(H, gens):
    """Euclidean distance from the rows of H to the cone spanned by the columns of gens."""
    from scipy.optimize import nnls
    gens = np.asarray(gens, float)
    out = np.empty(len(H))
    for i, h in enumerate(H):
        c, r = nnls(gens, h)
        out[i] = r
    return out


def cone_boundary_distance(H, gens):
    """Distance of points of a simplicial cone to its boundary (0 outside)."""
    gens = np.asarray(gens, float)
    n = gens.shape[0]
    if gens.shape[1] != n:
        raise ValueError("boundary distance needs a simplicial cone")
    inv = np.linalg.inv(gens)
    # facet normals: rows of inv, pointing inwards
    nrm = np.linalg.norm(inv, axis=1)
    s = (H @ inv.T) / nrm
    return np.maximum(s.min(axis=1), 0.0)


def fit_constants(m, samples=200, *, spacing=0.05, radius=3.0, cone=None, ell=None,
                  eps_cone=0.1, ball_R=None, roots=3, seed=0, tol=None):
    """Fit the existence constants from DP runs in balls around a few roots.

    cone: n x n matrix whose columns span the stable cone (default m.meta['cone']).
    ell: callable giving the stable time separation (default m.meta['ell']).
    """
    rng = np.random.default_rng(seed)
    cone = m.meta.get("cone") if cone is None else cone
    ell = m.meta.get("ell") if ell is None else ell
    n = m.dim
    tol = 2 * spacing if tol is None else tol
    roots_p = [np.zeros(n)] + [rng.uniform(0, 1, n) for _ in range(roots - 1)]
    ratio, errc, cbar, lips, triv = [], [], [], [], []
    kc = []
    data = []
    for root in roots_p:
        g = build_graph(m, root, None, spacing, None, "ball", radius=radius)
        res = run_dp(g)
        idx = np.flatnonzero(res.reachable)
        idx = idx[idx != res.source]
        if idx.size == 0:
            continue
        pick = rng.choice(idx, size=min(samples, idx.size), replace=False)
        pick.sort()
        P = g.points(pick)
        H = P - root
        d = res.values[pick]
        LR = np.array([res.path_to(i).L_R for i in pick])
        nrm = np.linalg.norm(H, axis=1)
        ok = nrm > 2 * spacing
        ratio.extend(LR[ok] / nrm[ok])
        data.append((root, P, d, res))
        if cone is not None:
            errc.extend(cone_distance(H, cone))
            inner = cone_boundary_distance(H, cone) >= eps_cone * nrm
            if ell is not None:
                cbar.extend(np.abs(np.array([ell(h) for h in H[inner]]) - d[inner]))
            Hin, din = H[inner], d[inner]
            if len(Hin) > 1:
                a = rng.integers(0, len(Hin), 4 * len(Hin))
                b = rng.integers(0, len(Hin), 4 * len(Hin))
                lips.extend(np.abs(din[a] - din[b]) / (np.linalg.norm(Hin[a] - Hin[b], axis=1) + 1))
            # K_cone(R): depth in the cone beyond which a whole R-ball is reachable
            R = ball_R if ball_R is not None else 2 * spacing
            depth = cone_boundary_distance(H, cone)
            full = res.reachable
            bad_depth = 0.0
            kR = int(math.ceil(R / spacing))
            for j, i in enumerate(pick):
                u = g.grid_coords(i)[0]
                okb = True
                for off in product(range(-kR, kR + 1), repeat=n):
                    off = np.array(off)
                    if np.linalg.norm(off) * spacing > R:
                        continue
                    jj = g.index_of(u + off)
                    if jj < 0:
                        okb = None
                        break
                    if not full[jj]:
                        okb = False
                        break
                if okb is False:
                    bad_depth = max(bad_depth, float(depth[j]))
            kc.append(bad_depth)
        # reverse triangle on sampled triples
        for _ in range(min(10, len(pick))):
            j = int(rng.integers(len(pick)))
            qn = g.grid_coords(pick[j])[0]
            sub = build_graph(m, P[j], None, spacing, None, "ball", radius=radius / 2)
            rs = run_dp(sub)
            later = np.flatnonzero(rs.reachable)
            if later.size < 2:
                continue
            for i2 in rng.choice(later, size=min(5, later.size), replace=False):
                u2 = qn + sub.grid_coords(i2)[0]
                k2 = g.index_of(u2)
                if k2 < 0:
                    continue
                dpr = res.values[k2] if np.isfinite(res.values[k2]) else 0.0
                triv.append(dpr - (d[j] + rs.values[i2]))
    rt = np.array(triv)
    violations = {"reverse_triangle": int(np.sum(rt < -2 * tol)) if rt.size else 0,
                  "reverse_triangle_worst": float(rt.min()) if rt.size else 0.0,
                  "triples": int(rt.size)}
    return DiagnosticsConstants(
        C_causal=_bootstrap_max(ratio, rng),
        std_burago=(0.0, (0.0, 0.0)),
        err_cone=_bootstrap_max(errc, rng),
        Cbar=_bootstrap_max(cbar, rng),
        K_cone=_bootstrap_max(kc, rng),
        Lc=_bootstrap_max(lips, rng),
        violations=violations,
        meta={"spacing": spacing, "radius": radius, "roots": len(roots_p)},
    )
