"""Regularity of maximizing tangent fields: Hoelder and Lipschitz fits, crossing
exchange gains, and the angle inequalities for future causal pairs.
"""
import csv
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .errors import NotCrossingConfiguration, StalledRefinement
from .reach import refine_maximizer, time_separation
from .spacetime import CausalPath, make_flat, pair_lengths, sample_cone


@dataclass
class SupportSample:
    """Base points and unit tangents of near-maximal curves."""
    points: np.ndarray
    tangents: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.points = np.atleast_2d(np.asarray(self.points, float))
        T = np.atleast_2d(np.asarray(self.tangents, float))
        self.tangents = T / np.linalg.norm(T, axis=1, keepdims=True)

    def __len__(self):
        return len(self.points)

    @classmethod
    def from_paths(cls, paths, per_path=None):
        """Midpoints and directions of the pieces of several polylines."""
        P, T = [], []
        for path in paths:
            V = path.vertices
            D = np.diff(V, axis=0)
            n = np.linalg.norm(D, axis=1)
            ok = n > 0
            M = (V[:-1] + V[1:])[ok] / 2
            D = D[ok] / n[ok, None]
            if per_path is not None and len(M) > per_path:
                idx = np.linspace(0, len(M) - 1, per_path).astype(int)
                M, D = M[idx], D[idx]
            P.append(M)
            T.append(D)
        return cls(np.vstack(P), np.vstack(T))


def torus_distance(X, Y):
    d = np.mod(X - Y + 0.5, 1.0) - 0.5
    return np.linalg.norm(d, axis=-1)


def pair_distances(sample, pairs=None, max_pairs=200000, seed=0, periodic=True):
    """Base and tangent distances over all pairs (or a deterministic random subset)."""
    n = len(sample)
    if pairs is None:
        total = n * (n - 1) // 2
        if total <= max_pairs:
            i, j = np.triu_indices(n, 1)
        else:
            rng = np.random.default_rng(seed)
            i = rng.integers(0, n, max_pairs)
            j = rng.integers(0, n, max_pairs)
            keep = i != j
            i, j = i[keep], j[keep]
    else:
        i, j = pairs
    X, Y = sample.points[i], sample.points[j]
    db = torus_distance(X, Y) if periodic else np.linalg.norm(X - Y, axis=1)
    dv = np.linalg.norm(sample.tangents[i] - sample.tangents[j], axis=1)
    # distance in the unit tangent bundle with the product metric
    dt = np.sqrt(db ** 2 + dv ** 2)
    return db, dt, dv


def holder_check(sample, collision_tol=1e-12, direction_tol=1e-6, **kw):
    """Smallest K with dist(v,w)^2 <= K dist(pi v, pi w) over the pairs, plus injectivity."""
    if len(sample) < 2:
        return {"K": 0.0, "pairs": 0, "injective": True, "collisions": 0}
    db, dt, dv = pair_distances(sample, **kw)
    sep = db > collision_tol
    coll = ~sep
    bad = int(np.sum(coll & (dv > direction_tol)))
    K = float(np.max(dt[sep] ** 2 / db[sep])) if np.any(sep) else 0.0
    return {"K": K, "pairs": int(len(db)), "injective": bad == 0, "collisions": int(coll.sum()),
            "injectivity_violations": bad}


def lipschitz_check(sample, collision_tol=1e-12, **kw):
    """Smallest K' with dist(v,w) <= K' dist(pi v, pi w) over the pairs."""
    if len(sample) < 2:
        return {"K_prime": 0.0, "pairs": 0}
    db, dt, _ = pair_distances(sample, **kw)
    sep = db > collision_tol
    return {"K_prime": float(np.max(dt[sep] / db[sep])) if np.any(sep) else 0.0,
            "pairs": int(len(db))}


def time_kappa(m, sample, kappa):
    """Mask of tangents whose Euclidean distance to the light cone is at least kappa."""
    G, _ = m.forms(sample.points)
    return light_cone_distance(G, sample.tangents) >= kappa


# ---------------------------------------------------------------- Minkowski ladder

def minkowski_pair(delta, angle0=0.0):
    """Two Minkowski maximizers through nearby points: base distance delta^2, tangent distance delta."""
    theta = 2 * math.asin(delta / 2)
    u = np.array([math.cos(angle0), math.sin(angle0)])
    w = np.array([math.cos(angle0 + theta), math.sin(angle0 + theta)])
    p0 = delta ** 2 * np.array([-math.sin(angle0), math.cos(angle0)])
    return SupportSample(np.vstack([np.zeros(2), p0]), np.vstack([u, w]),
                         {"delta": delta, "theta": theta})


def minkowski_ladder(deltas=(1e-1, 1e-2, 1e-3, 1e-4)):
    """Hoelder and Lipschitz fits along the ladder plus the log-log exponent."""
    rows = []
    for d in deltas:
        s = minkowski_pair(d)
        db, dt, dv = pair_distances(s, periodic=False)
        rows.append({"delta": d, "dist_base": float(db[0]), "dist_tangent": float(dv[0]),
                     "dist_bundle": float(dt[0]),
                     "K_holder": holder_check(s, periodic=False)["K"],
                     "K_lipschitz": lipschitz_check(s, periodic=False)["K_prime"]})
    x = np.log([r["dist_base"] for r in rows])
    y = np.log([r["dist_tangent"] for r in rows])
    p, c = np.polyfit(x, y, 1)
    lips = [r["K_lipschitz"] for r in rows]
    return {"rows": rows, "exponent": float(p), "intercept": float(c),
            "lipschitz_growth": float(lips[-1] / lips[0]),
            "holder_max": float(max(r["K_holder"] for r in rows))}


# ---------------------------------------------------------------- crossing gain

def _segment_length(m, path):
    return float(np.sum(pair_lengths(m, path.vertices[:-1], path.vertices[1:], rule="auto")))


def local_distance(m, p, q, spacing, stencil_k=None, refine=60, pieces=8):
    """d_hat(p, q): diamond DP, then vertex refinement from the better of its path and the chord.

    Every candidate is a causal polyline, so the result stays a lower estimate.
    """
    d, path = time_separation(m, p, q, spacing, stencil_k, "diamond")
    if d <= 0 or not len(path):
        return 0.0, path
    t = np.linspace(0, 1, pieces + 1)[:, None]
    chord = CausalPath(p + t * (np.asarray(q) - p))
    Lc = float(np.sum(pair_lengths(m, chord.vertices[:-1], chord.vertices[1:], rule="auto")))
    causal = np.all(pair_lengths(m, chord.vertices[:-1], chord.vertices[1:], rule="auto") >= 0)
    start = chord if causal and Lc >= d else path.simplified()
    d = max(d, Lc) if causal else d
    if len(start) > 2:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", StalledRefinement)
            start = refine_maximizer(m, start, refine, step=spacing, min_gain=1e-15)
        d = max(d, _segment_length(m, start))
    return d, start


def exact_constant_distance(m, p, q):
    """Closed-form time separation of a constant metric."""
    G = m.g_at(p)
    o = m.orient(p)
    v = np.asarray(q, float) - np.asarray(p, float)
    g = v @ G @ v
    if g > 0 or v @ G @ o >= 0:
        return 0.0
    return math.sqrt(-g)


def crossing_gain(m, x1, x2, spacing=None, *, route="dp", stencil_k=None):
    """Length gained by exchanging the ends of two crossing segments.

    x1, x2 are CausalPaths parametrised over [-e, e]; the gain is
    d(x1(-e), x2(e)) + d(x2(-e), x1(e)) - L(x1) - L(x2).
    """
    a1, b1, a2, b2 = x1.start, x1.end, x2.start, x2.end
    if route == "exact":
        if m.kind != K.CONST:
            raise ValueError("the exact route needs a constant metric")
        d12, d21 = exact_constant_distance(m, a1, b2), exact_constant_distance(m, a2, b1)
    else:
        e = 0.5 * max(np.linalg.norm(b1 - a1), np.linalg.norm(b2 - a2))
        spacing = spacing or e / 50
        d12, _ = local_distance(m, a1, b2, spacing, stencil_k)
        d21, _ = local_distance(m, a2, b1, spacing, stencil_k)
    if d12 <= 0 or d21 <= 0:
        raise NotCrossingConfiguration("exchanged endpoints are not causally related")
    L1, L2 = _segment_length(m, x1), _segment_length(m, x2)
    return float(d12 + d21 - L1 - L2)


def straight_segment(p, v, e):
    p, v = np.asarray(p, float), np.asarray(v, float)
    return CausalPath(np.vstack([p - e * v, p + e * v]))


def crossing_battery(m=None, count=1000, e=0.1, K_hyp=1.0, delta=1e-2, spacing=None, seed=0,
                     route="dp", pool=None, angle_range=(0.02, 0.3), stencil_k=3):
    """Random crossing configurations satisfying dist(v,w)^2 >= K dist(bases), dist(bases) <= delta.

    Returns per-configuration (dist_base, dist_tangent, gain) rows and the fitted
    eta = min gain / dist_tangent^2.
    """
    m = make_flat(2) if m is None else m
    rng = np.random.default_rng(seed)
    configs = []
    while len(configs) < count:
        a0 = rng.uniform(-0.3, 0.3)
        th = rng.uniform(*angle_range) * rng.choice([-1, 1])
        u = np.array([math.cos(a0), math.sin(a0)])
        w = np.array([math.cos(a0 + th), math.sin(a0 + th)])
        dv = float(np.linalg.norm(u - w))
        db = min(delta, dv ** 2 / K_hyp) * rng.uniform()
        phi = rng.uniform(0, 2 * np.pi)
        p2 = db * np.array([math.cos(phi), math.sin(phi)])
        configs.append((u, w, p2, db, dv))

    def run(c):
        u, w, p2, db, dv = c
        x1 = straight_segment(np.zeros(2), u, e)
        x2 = straight_segment(p2, w, e)
        return db, dv, crossing_gain(m, x1, x2, spacing, route=route, stencil_k=stencil_k)

    rows = list(pool.map(run, configs)) if pool is not None else [run(c) for c in configs]
    R = np.array(rows)
    eta = R[:, 2] / R[:, 1] ** 2
    return {"rows": R, "eta_hat": float(eta.min()), "min_gain": float(R[:, 2].min()),
            "positive": bool(np.all(R[:, 2] > 0)), "count": len(rows), "e": e, "K": K_hyp,
            "delta": delta}


def write_gain_csv(rows, fname):
    with open(fname, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["dist_base", "dist_tangent", "gain"])
        for r in rows:
            w.writerow([repr(float(x)) for x in r])
    return fname


# ---------------------------------------------------------------- angle inequalities

def light_cone_distance(G, V):
    """Euclidean distance from each row of V to the null cone of the matching form.

    The nearest null vector solves (I - mu G) u = v; mu is found by bisection
    on the pole-free interval around 0 in the eigenbasis of G. The component
    along the pole's eigenvector is then fixed by the null condition, which
    also covers v with no such component (root on the pole).
    """
    lam, Q = np.linalg.eigh(G)
    c = np.einsum("kji,kj->ki", Q, V)
    f0 = np.sum(lam * c ** 2, axis=1)
    pos_max = lam.max(axis=1)
    neg_min = lam.min(axis=1)

    def solve(mu):
        den = 1 - mu[:, None] * lam
        return np.divide(c, den, out=np.zeros_like(c), where=den != 0)

    # f(mu) = sum lam c^2 / (1 - mu lam)^2 is increasing on (1/neg_min, 1/pos_max)
    lo = np.where(f0 < 0, 0.0, 1.0 / neg_min)
    hi = np.where(f0 < 0, 1.0 / pos_max, 0.0)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        f = np.sum(lam * solve(mid) ** 2, axis=1)
        lo = np.where(f < 0, mid, lo)
        hi = np.where(f < 0, hi, mid)
    u = solve(0.5 * (lo + hi))
    # the pole component is the ill-conditioned one: take it from g(u,u) = 0
    rows = np.arange(len(c))
    j = np.where(f0 < 0, np.argmax(lam, axis=1), np.argmin(lam, axis=1))
    lj = lam[rows, j]
    rest = np.sum(lam * u ** 2, axis=1) - lj * u[rows, j] ** 2
    sign = np.where(c[rows, j] < 0, -1.0, 1.0)
    u[rows, j] = sign * np.sqrt(np.maximum(-rest / lj, 0.0))
    return np.linalg.norm(u - c, axis=1)


def _check_points(m, count, rng):
    P = rng.uniform(0, 1, (count, m.dim))
    if m.kind == K.HEDLUND:
        from .hedlund import BASES
        eps = m.params[3]
        k = count // 4
        for f in range(3):
            sl = slice(k * f, k * (f + 1))
            off = rng.normal(size=(k, 3))
            off[:, f] = 0
            off *= (rng.uniform(0, 1.2 * eps, k) / np.linalg.norm(off, axis=1))[:, None]
            base = BASES[f] + np.zeros((k, 3))
            base[:, f] = rng.uniform(0, 1, k)
            P[sl] = base + off
    return P


def lemma20a_check(m, samples=100000, seed=0, boundary_fraction=0.1, chunk=20000):
    """Fit eps and C in the two angle inequalities for future causal pairs at shared points.

    (i)  -g(v,w) - |v|_g |w|_g >= eps |v| |w| sin^2 angle(v,w)
    (ii) |g(v,v)| <= C |v| dist(v, light cone)
    """
    rng = np.random.default_rng(seed)
    eps_fit, c_fit = math.inf, 0.0
    worst_i = math.inf
    done = 0
    while done < samples:
        k = min(chunk, samples - done)
        P = _check_points(m, k, rng)
        G, O = m.forms(P)
        V = sample_cone(G, O, rng, boundary_fraction)
        W = sample_cone(G, O, rng, boundary_fraction)
        gvw = np.einsum("ki,kij,kj->k", V, G, W)
        nv = np.sqrt(np.maximum(-np.einsum("ki,kij,kj->k", V, G, V), 0.0))
        nw = np.sqrt(np.maximum(-np.einsum("ki,kij,kj->k", W, G, W), 0.0))
        lhs = -gvw - nv * nw
        cosang = np.clip(np.einsum("ki,ki->k", V, W), -1, 1)
        sin2 = 1 - cosang ** 2
        worst_i = min(worst_i, float(lhs.min()))
        ok = sin2 > 1e-10
        if np.any(ok):
            eps_fit = min(eps_fit, float(np.min(lhs[ok] / sin2[ok])))
        gvv = np.abs(np.einsum("ki,kij,kj->k", V, G, V))
        dist = light_cone_distance(G, V)
        okd = dist > 1e-12
        if np.any(okd):
            c_fit = max(c_fit, float(np.max(gvv[okd] / dist[okd])))
        done += k
    return {"samples": done, "eps_tilde": eps_fit, "C_tilde": c_fit,
            "holds": bool(eps_fit > 0 and math.isfinite(c_fit)), "min_lhs_i": worst_i}
