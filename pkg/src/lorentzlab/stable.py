"""Stable time cone, stable time separation and its dual.

The stable time separation is estimated from d(x, x + N h)/N; homogeneity is
exact because only unit directions are stored.
"""
import csv
import math
from itertools import product
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog
from scipy.spatial import ConvexHull, QhullError

from . import _kernels as K
from .errors import NotConstructible, NotInDualCone, ZeroLengthPath
from .reach import build_graph, run_dp, time_separation
from .spacetime import VALIDATION_MARGIN, CausalPath

REACH_MARGIN = VALIDATION_MARGIN


def rotation_vector(path):
    """Displacement per unit Euclidean arclength."""
    L = path.param[-1] - path.param[0] if len(path) else 0.0
    if not L > 0:
        raise ZeroLengthPath("path has zero length")
    return (path.end - path.start) / L


# ---------------------------------------------------------------- cones

def section_of(m):
    """Covector c used to cut cones to a compact section {c.h = 1}."""
    if "section" in m.meta:
        return np.asarray(m.meta["section"], float)
    if m.kind in (K.HEDLUND, K.BOUNDARY2):
        return np.ones(m.dim)
    return np.eye(m.dim)[0]


def _plane_basis(c):
    c = np.asarray(c, float)
    n = len(c)
    Q, _ = np.linalg.qr(np.column_stack([c, np.eye(n)]))
    return Q[:, 1:n]


def to_section(H, c):
    """Radial projection of rows of H onto {c.h = 1}, in orthonormal plane coordinates."""
    H = np.atleast_2d(H)
    s = H @ c
    P = H / s[:, None]
    c0 = c / (c @ c)
    return (P - c0) @ _plane_basis(c)


def _segment_hull(X):
    """Extreme points of a collinear (or coincident) planar set along its spread direction."""
    c = X.mean(axis=0)
    _, _, vt = np.linalg.svd(X - c)
    t = (X - c) @ vt[0]
    lo, hi = int(np.argmin(t)), int(np.argmax(t))
    return X[[lo]] if np.allclose(X[lo], X[hi]) else X[[lo, hi]]


def _planar_hull(V):
    """Ordered hull vertices and facet equations (None for degenerate sets)."""
    if len(V) >= 3:
        try:
            hull = ConvexHull(V)
            return V[hull.vertices], hull.equations
        except QhullError:
            pass
    return _segment_hull(V), None


def _hull_vertices(X):
    if X.shape[1] == 1:
        return np.array([[X.min()], [X.max()]])
    return _planar_hull(X)[0]


def _dist_to_hull(p, V):
    """Distance from p to the convex hull of the points V (small QP by projection)."""
    if V.shape[1] == 1:
        lo, hi = V.min(), V.max()
        return float(max(lo - p[0], p[0] - hi, 0.0))
    # a point inside has zero distance; otherwise the nearest point is on an edge
    Vh, eq = _planar_hull(V)
    if eq is not None and np.all(eq[:, :-1] @ p + eq[:, -1] <= 1e-12):
        return 0.0
    if len(Vh) == 1:
        return float(np.linalg.norm(p - Vh[0]))
    best = np.inf
    k = len(Vh)
    for i in range(k):
        a, b = Vh[i], Vh[(i + 1) % k]
        d = b - a
        t = 0.0 if d @ d == 0 else np.clip((p - a) @ d / (d @ d), 0, 1)
        best = min(best, float(np.linalg.norm(p - a - t * d)))
    return best


def convex_hausdorff(X, Y):
    """Hausdorff distance between the convex hulls of two point sets in a plane or line."""
    VX, VY = _hull_vertices(X), _hull_vertices(Y)
    a = max(_dist_to_hull(v, VY) for v in VX)
    b = max(_dist_to_hull(v, VX) for v in VY)
    return float(max(a, b))


def zero_in_hull(U):
    """Whether 0 is a convex combination of the rows of U (linear program)."""
    k, n = U.shape
    A = np.vstack([U.T, np.ones((1, k))])
    b = np.concatenate([np.zeros(n), [1.0]])
    r = linprog(np.zeros(k), A_eq=A, b_eq=b, bounds=[(0, None)] * k, method="highs")
    return bool(r.status == 0)


@dataclass
class ConeEstimate:
    directions: np.ndarray  # unit vectors of reached displacements
    section: np.ndarray
    probe_radius: float
    zero_in_hull: bool
    meta: dict = field(default_factory=dict)

    def section_points(self):
        return to_section(self.directions, self.section)

    def hausdorff_to(self, generators):
        """Distance on the section to the cone spanned by the columns of `generators`."""
        G = np.asarray(generators, float).T
        return convex_hausdorff(self.section_points(), to_section(G, self.section))

    def contains(self, h, tol=1e-9):
        h = np.atleast_2d(h)
        if np.any(h @ self.section <= 0):
            return False
        return _dist_to_hull(to_section(h, self.section)[0], _hull_vertices(self.section_points())) <= tol

    def flag(self, h, rel=0.02):
        """'in', 'boundary' or 'out' for a direction."""
        h = np.asarray(h, float)
        if h @ self.section <= 0:
            return "out"
        p = to_section(h[None], self.section)[0]
        V = _hull_vertices(self.section_points())
        d = _dist_to_hull(p, V)
        if d > rel:
            return "out"
        if d > 0:
            return "boundary"
        # depth inside: distance to the hull boundary
        if V.shape[1] == 1:
            depth = min(p[0] - V.min(), V.max() - p[0])
        else:
            _, eq = _planar_hull(V)
            depth = 0.0 if eq is None else float(np.min(-(eq[:, :-1] @ p + eq[:, -1])))
        return "in" if depth > rel else "boundary"


def _ball_directions(m, R, spacing, shell, stencil_k):
    g = build_graph(m, np.zeros(m.dim), None, spacing, stencil_k, "ball", radius=R,
                    margin=REACH_MARGIN)
    res = run_dp(g)
    P = g.points()
    r = np.linalg.norm(P, axis=1)
    sel = res.reachable & (r >= R - shell) & (r > 0)
    H = P[sel]
    return H / np.linalg.norm(H, axis=1, keepdims=True), {"n_nodes": g.n_nodes,
                                                            "reached": int(sel.sum())}


def _line_probe_targets(R, u):
    """Pairs (base, q): q on a line near base + R*u, nearest first, over all three bases."""
    from .hedlund import BASES, _others
    u = np.asarray(u, float) / np.linalg.norm(u)
    out = []
    for base in BASES:
        q0 = base + R * u
        for f in range(3):
            a, b = _others(f)
            for da, db in product((0, 1), repeat=2):
                q = q0.copy()
                q[a] = BASES[f, a] + math.floor(q0[a] - BASES[f, a]) + da
                q[b] = BASES[f, b] + math.floor(q0[b] - BASES[f, b]) + db
                # the along-line coordinate stays on the probe grid
                q[f] = round(q0[f] * 4) / 4
                out.append((float(np.linalg.norm(q - q0)), base, q))
    out.sort(key=lambda t: t[0])
    return [(b, q) for _, b, q in out]


def _probe_reachable(m, p, q, spacing, radius):
    from .hedlund import any_chain
    try:
        guide = any_chain(p, q)
    except NotConstructible:
        return None
    g = build_graph(m, p, q, spacing, 1, "tube", guide=guide.vertices, radius=radius,
                    margin=REACH_MARGIN)
    return run_dp(g).value_at(q) > 0


def simplex_probes(step=0.1, outside=0.05):
    """Directions on the 3-simplex grid plus slightly outside points."""
    k = int(round(1 / step))
    pts = [np.array([i, j, k - i - j]) / k for i in range(k + 1) for j in range(k + 1 - i)]
    for f in range(3):
        for s in np.linspace(0, 1, 5):
            u = np.zeros(3)
            a, b = [x for x in range(3) if x != f]
            u[a], u[b], u[f] = s + outside / 2, 1 - s + outside / 2, -outside
            pts.append(u)
    return np.array(pts)


def estimate_cone(m, direction_samples=None, R=20.0, spacing=None, *, shell=None, stencil_k=None,
                  probe_spacing=0.005, probe_radius=None, pool=None):
    """Reachable displacement directions at distance about R from the origin.

    Two-dimensional and flat metrics use one ball-shaped DP. The tube metric
    probes line points near R*u for each sampled u with a guided tube DP.
    """
    c = section_of(m)
    if m.kind == K.HEDLUND:
        U = simplex_probes() if direction_samples is None else np.asarray(direction_samples, float)
        eps = m.params[3]
        rad = probe_radius or 2 * eps
        jobs = [_line_probe_targets(R, u) for u in U]

        def run(targets):
            # the first candidate with a line-and-jump guide decides the probe
            for p, q in targets:
                ok = _probe_reachable(m, p, q, probe_spacing, rad)
                if ok is not None:
                    return q - p if ok else None
            return None

        found = list(pool.map(run, jobs)) if pool is not None else [run(t) for t in jobs]
        H = np.array([h for h in found if h is not None])
        dirs = H / np.linalg.norm(H, axis=1, keepdims=True)
        meta = {"probes": len(U), "reached": len(H), "probe_spacing": probe_spacing}
    else:
        spacing = spacing or R / 400
        shell = shell or 4 * spacing
        dirs, meta = _ball_directions(m, R, spacing, shell, stencil_k)
        if direction_samples is not None:
            meta["direction_samples_ignored"] = True
    return ConeEstimate(dirs, c, R, zero_in_hull(dirs) if len(dirs) else False, meta)


# ---------------------------------------------------------------- stable time separation

def default_base(m, h):
    """Base point for probes: on a line of the dominant family for the tube metric."""
    if m.kind == K.HEDLUND:
        from .hedlund import BASES
        f = int(np.argmax(h))
        return BASES[f].copy()
    return np.zeros(m.dim)


def stable_time_separation(m, h, N_schedule=(2, 4, 8), spacing=None, *, base=None,
                           cbar=None, lc=1.0, radius=None, stencil_k=None, pool=None):
    """Estimate of l(h) with a one-sided error bar.

    Returns (value, err, info); value = d(x, x + N h)/N at the largest N of the
    schedule and err = Cbar/N, with Cbar fitted from the schedule unless given.
    """
    h = np.asarray(h, float)
    x = default_base(m, h) if base is None else np.asarray(base, float)
    Ns = sorted(N_schedule)
    if m.kind == K.HEDLUND:
        from .hedlund import guide_path
        spacing = spacing or 0.0025
        rad = radius or 8 * m.params[3]

        def one(N):
            q = x + N * h
            try:
                g = guide_path(x, q)
            except NotConstructible:
                return 0.0, q
            d, _ = time_separation(m, x, q, spacing, 1, "tube", guide=g.vertices, radius=rad)
            return d, q
    else:
        spacing = spacing or 0.02

        def one(N):
            q = x + np.round(N * h / spacing) * spacing
            d, _ = time_separation(m, x, q, spacing, stencil_k, "diamond")
            return d, q

    results = list(pool.map(one, Ns)) if pool is not None else [one(N) for N in Ns]
    d = np.array([r[0] for r in results])
    snap = np.array([np.linalg.norm(r[1] - x - N * h) for r, N in zip(results, Ns)])
    info = {"N": Ns, "d": d.tolist(), "snap": snap.tolist(), "base": x.tolist()}
    if np.all(d <= 0):
        info["flag"] = "outside"
        return 0.0, 0.0, info
    N = Ns[-1]
    val = d[-1] / N
    if cbar is None:
        # d(N) = l N - C: slope-free fit with the final estimate as rate
        cbar = float(max(0.0, np.max(val * np.array(Ns) - d)))
    err = (cbar + lc * snap[-1]) / N
    # doubling schedules must be superadditive: d(2N) >= 2 d(N) up to the error bar
    sup = None
    if _doubling(Ns):
        sup = bool(all(b >= 2 * a - 2 * cbar - 1e-9 for a, b in zip(d[:-1], d[1:])))
    info.update({"flag": "in", "cbar": cbar, "superadditive": sup})
    return float(val), float(err), info


def boundary_stable_separation(m, h, inward, etas=(0.2, 0.1, 0.05), **kw):
    """Limsup of interior estimates at h + eta*inward as eta decreases."""
    h = np.asarray(h, float)
    est = []
    for eta in etas:
        v, e, info = stable_time_separation(m, h + eta * np.asarray(inward, float), **kw)
        est.append((v, e))
    v, e = max(est)
    return v, e, {"flag": "boundary", "interior": est, "etas": list(etas)}


def _doubling(Ns):
    return all(b == 2 * a for a, b in zip(Ns[:-1], Ns[1:]))


@dataclass
class StableSepTable:
    directions: np.ndarray
    values: np.ndarray
    errs: np.ndarray
    N_used: np.ndarray
    flags: list
    meta: dict = field(default_factory=dict)

    def ell(self, h):
        """Interpolated estimate at h (homogeneous extension of the nearest table entries)."""
        h = np.asarray(h, float)
        nh = np.linalg.norm(h)
        if nh == 0:
            return 0.0
        u = h / nh
        fn = self.meta.get("estimator")
        if fn is not None:
            return float(fn(h))
        sims = self.directions @ u
        i = int(np.argmax(sims))
        return float(nh * self.values[i])

    def write_csv(self, fname):
        n = self.directions.shape[1]
        with open(fname, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([f"h{i + 1}" for i in range(n)] + ["ell", "err", "N", "flag"])
            for d, v, e, N, f in zip(self.directions, self.values, self.errs, self.N_used, self.flags):
                w.writerow([repr(float(x)) for x in d] + [repr(float(v)), repr(float(e)), int(N), f])
        return fname


def field_table(m, directions, R=10.0, spacing=0.02, stencil_k=None, margin=None):
    """Table from one ball DP: l(u) ~ d(0, r u)/r for every direction at once.

    Values come from a stencil of order 2k; the error bar adds the change from
    order k to the lattice rounding, so stencil bias is measured, not assumed away.
    """
    from .reach import default_stencil_k
    kw = {} if margin is None else {"margin": margin}
    k = stencil_k or default_stencil_k(m)
    k2 = 2 * k
    runs = []
    for kk in (k2, k):
        g = build_graph(m, np.zeros(m.dim), None, spacing, kk, "ball", radius=R, **kw)
        runs.append(run_dp(g))
    res, coarse = runs
    U = np.asarray(directions, float)
    U = U / np.linalg.norm(U, axis=1, keepdims=True)
    r = 0.95 * R

    def estimator(h):
        h = np.asarray(h, float)
        nh = np.linalg.norm(h)
        q = np.round(r * h / nh / spacing) * spacing
        return nh * res.value_at(q) / np.linalg.norm(q)

    vals, errs, flags = [], [], []
    for u in U:
        q = np.round(r * u / spacing) * spacing
        nq = np.linalg.norm(q)
        v, vc = res.value_at(q) / nq, coarse.value_at(q) / nq
        vals.append(v)
        flags.append("out" if v <= 0 else "in" if vc > 0 else "boundary")
        # an unreached lattice point only bounds l(u) from below
        errs.append(math.inf if v <= 0 else 2 * spacing / r + np.linalg.norm(q / nq - u) + abs(v - vc))
    return StableSepTable(U, np.array(vals), np.array(errs), np.full(len(U), r), flags,
                          {"estimator": estimator, "result": res, "R": R, "spacing": spacing,
                           "stencil_k": (k, k2)})


def stable_table(m, directions, N_schedule=(2, 4, 8), spacing=None, pool=None, **kw):
    U = np.asarray(directions, float)
    vals, errs, Ns, flags = [], [], [], []
    for u in U:
        v, e, info = stable_time_separation(m, u, N_schedule, spacing, pool=pool, **kw)
        vals.append(v)
        errs.append(e)
        Ns.append(info["N"][-1])
        flags.append(info["flag"])
    return StableSepTable(U, np.array(vals), np.array(errs), np.array(Ns), flags)


def check_T17_properties(table, pairs=1000, seed=0, eps_cone=0.1, lc_pairs=2000):
    """Superadditivity and midpoint concavity on sampled pairs, plus a coarse-Lipschitz fit."""
    rng = np.random.default_rng(seed)
    idx = [i for i, f in enumerate(table.flags) if f == "in" and table.values[i] > 0]
    viol_sup, viol_conc, worst = 0, 0, np.inf
    checked = 0
    err_in = max((table.errs[i] for i in idx), default=0.0)
    if len(idx) >= 2:
        for _ in range(pairs):
            i, j = rng.choice(idx, 2)
            a, b = rng.uniform(0.2, 1.0, 2)
            h1, h2 = a * table.directions[i], b * table.directions[j]
            l1, l2 = a * table.values[i], b * table.values[j]
            l12 = table.ell(h1 + h2)
            tol = 2 * max(a * table.errs[i], b * table.errs[j], 1e-12) + 2 * err_in
            gap = l12 - (l1 + l2)
            worst = min(worst, gap)
            viol_sup += gap < -tol
            lm = table.ell(0.5 * (h1 + h2))
            viol_conc += lm < 0.5 * (l1 + l2) - tol
            checked += 1
    rep = {"homogeneity": "exact (unit directions stored)", "pairs": checked,
           "superadditivity_violations": int(viol_sup), "concavity_violations": int(viol_conc),
           "worst_superadditivity_gap": float(worst) if checked else None}
    res = table.meta.get("result")
    if res is not None:
        g = res.graph
        P = g.points()
        ok = res.reachable & (np.linalg.norm(P, axis=1) > 1.0)
        idx2 = np.flatnonzero(ok)
        if idx2.size > 2:
            a = rng.choice(idx2, lc_pairs)
            b = rng.choice(idx2, lc_pairs)
            num = np.abs(res.values[a] - res.values[b])
            den = np.linalg.norm(P[a] - P[b], axis=1) + 1.0
            rep["Lc_fit"] = float(np.max(num / den))
    return rep


def dual_stable(table, alpha, tol=1e-12):
    """min over table directions of alpha(h)/l(h) for l(h) > 0."""
    alpha = np.asarray(alpha, float)
    vals = table.directions @ alpha
    inside = np.array([f == "in" for f in table.flags])
    if np.any(vals[inside] < -tol):
        raise NotInDualCone(f"alpha is negative on sampled cone directions: {vals[inside].min()}")
    pos = inside & (table.values > 0)
    if not np.any(pos):
        return math.inf
    return float(np.min(vals[pos] / table.values[pos]))
