"""Equivariant pseudo-time functions, their defects along curves, and l_infinity.

A calibration is tau(x) = alpha(x) + phi(x) with phi a periodic trigonometric
polynomial; closed one-forms are represented the same way, omega = alpha + dphi.
"""
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from . import _kernels as K
from .reach import build_graph, run_dp
from .spacetime import pair_lengths

NEG_INF = -math.inf


@dataclass
class Calibration:
    alpha: np.ndarray
    modes: list = field(default_factory=list)   # (k integer vector, a, b): a cos + b sin of 2 pi k.x
    lstar: float = math.nan

    def __post_init__(self):
        self.alpha = np.asarray(self.alpha, float)
        self.modes = [(np.asarray(k, float), float(a), float(b)) for k, a, b in self.modes]

    def tau(self, X):
        X = np.atleast_2d(X)
        t = X @ self.alpha
        for k, a, b in self.modes:
            ph = 2 * np.pi * X @ k
            t = t + a * np.cos(ph) + b * np.sin(ph)
        return t

    def omega(self, X):
        """The closed form alpha + dphi at the rows of X."""
        X = np.atleast_2d(X)
        W = np.tile(self.alpha, (len(X), 1))
        for k, a, b in self.modes:
            ph = 2 * np.pi * X @ k
            W += np.outer(2 * np.pi * (-a * np.sin(ph) + b * np.cos(ph)), k)
        return W

    @property
    def lipschitz(self):
        return float(np.linalg.norm(self.alpha)
                     + sum(2 * np.pi * np.linalg.norm(k) * math.hypot(a, b) for k, a, b in self.modes))

    def equivariance_error(self, X, shifts):
        """max |tau(x + k) - tau(x) - alpha(k)| over sample points and lattice shifts."""
        X = np.atleast_2d(X)
        err = 0.0
        for k in np.atleast_2d(shifts):
            err = max(err, float(np.max(np.abs(self.tau(X + k) - self.tau(X) - self.alpha @ k))))
        return err

    def as_dict(self):
        return {"alpha": self.alpha.tolist(), "lstar": self.lstar, "lipschitz": self.lipschitz,
                "modes": [[k.tolist(), a, b] for k, a, b in self.modes]}


def hedlund_lstar(lam, alpha):
    """Dual stable separation of the tube metric: min_j alpha_j / lambda_j."""
    return float(np.min(np.asarray(alpha, float) / np.asarray(lam, float)))


# ---------------------------------------------------------------- pseudo-time

def sample_causal_pairs(m, count=1000, *, roots=None, spacing=None, radius=1.0, seed=0,
                        stencil_k=None):
    """Pairs (p, q, d_hat) with q reachable from p, from ball DPs around a few roots."""
    rng = np.random.default_rng(seed)
    if roots is None:
        if m.kind == K.HEDLUND:
            from .hedlund import BASES
            roots = [b for b in BASES] + [rng.uniform(0, 1, 3)]
        else:
            roots = [np.zeros(m.dim)] + [rng.uniform(0, 1, m.dim) for _ in range(3)]
    spacing = spacing or (0.01 if m.kind == K.HEDLUND else 0.02)
    pool_p, pool_q, pool_d = [], [], []
    for root in roots:
        g = build_graph(m, np.asarray(root, float), None, spacing, stencil_k, "ball", radius=radius)
        res = run_dp(g)
        idx = np.flatnonzero(res.reachable)
        idx = idx[idx != res.source]
        pool_p.append(np.tile(root, (len(idx), 1)))
        pool_q.append(g.points(idx))
        pool_d.append(res.values[idx])
    P, Q, D = np.vstack(pool_p), np.vstack(pool_q), np.concatenate(pool_d)
    pick = np.sort(rng.choice(len(D), size=min(count, len(D)), replace=False))
    P, Q, D = P[pick], Q[pick], D[pick]
    return P, Q, D, {"spacing": spacing, "radius": radius, "roots": len(roots)}


def is_pseudo_time(m, cal, l=1.0, samples=1000, *, pairs=None, tol=None, seed=0, **kw):
    """Check tau(q) - tau(p) >= l d_hat(p, q) on sampled causal pairs.

    Also fits the largest eps with tau(q) - tau(p) >= eps |q - p| on the pairs.
    """
    if pairs is None:
        P, Q, D, info = sample_causal_pairs(m, samples, seed=seed, **kw)
    else:
        P, Q, D = pairs
        info = {}
    dt = cal.tau(Q) - cal.tau(P)
    margin = dt - l * D
    tol = 2 * info.get("spacing", 0.0) if tol is None else tol
    dist = np.linalg.norm(Q - P, axis=1)
    worst = int(np.argmin(margin))
    return {"pass": bool(margin.min() >= -tol), "pairs": int(len(D)), "l": l, "tolerance": tol,
            "worst_margin": float(margin.min()), "worst_pair": [P[worst].tolist(), Q[worst].tolist()],
            "eps_hat": float(np.min(dt / dist)), "strictly_increasing": bool(np.all(dt > 0)), **info}


def check_calibrated(m, cal, path, lstar=None, rule="auto"):
    """max over pieces of |tau increment - lstar * Lorentzian length| per Euclidean length.

    For a polyline the supremum over subintervals is attained on single pieces,
    because the quotient over a union is an average of the piece quotients.
    """
    lstar = cal.lstar if lstar is None else lstar
    V = path.vertices
    A, B = V[:-1], V[1:]
    LR = np.linalg.norm(B - A, axis=1)
    keep = LR > 0
    A, B, LR = A[keep], B[keep], LR[keep]
    L = pair_lengths(m, A, B, rule=rule)
    dt = cal.tau(B) - cal.tau(A)
    q = np.abs(dt - lstar * L) / LR
    return {"defect": float(q.max()), "mean_defect": float(np.sum(q * LR) / LR.sum()),
            "pieces": int(len(q)), "lstar": lstar}


def maximizer_spot_check(m, path, spacing, radius=None, stencil_k=None):
    """d_hat between the endpoints of a path (tube DP around it) against its length."""
    from .reach import time_separation
    L = float(np.sum(pair_lengths(m, path.vertices[:-1], path.vertices[1:], rule="auto")))
    d, _ = time_separation(m, path.start, path.end, spacing, stencil_k, "tube", guide=path.vertices,
                           radius=radius or 4 * spacing)
    return {"length": L, "d_hat": d, "gap": d - L}


def light_cone_separation(m, path):
    """Smallest Euclidean angle-like distance of the unit tangents from the light cone."""
    V = path.vertices
    D = np.diff(V, axis=0)
    n = np.linalg.norm(D, axis=1)
    D = D[n > 0] / n[n > 0, None]
    G, _ = m.forms((V[:-1] + V[1:])[n > 0] / 2)
    q = -np.einsum("ki,kij,kj->k", D, G, D)
    scale = np.linalg.norm(G.reshape(len(G), -1), axis=1)
    return float(np.min(q / scale))


# ---------------------------------------------------------------- l_infinity

def probe_points(m, count=4096, seed=0):
    """Uniform points of the unit cell plus, for the tube metric, points on and near the lines."""
    rng = np.random.default_rng(seed)
    P = [rng.uniform(0, 1, (count, m.dim))]
    if m.kind == K.HEDLUND:
        from .hedlund import BASES
        eps = m.params[3]
        t = np.linspace(0, 1, 64, endpoint=False)
        for f, b in enumerate(BASES):
            for r in (0.0, 0.25 * eps, 0.5 * eps, 0.75 * eps):
                X = np.tile(b, (len(t), 1))
                X[:, f] += t
                off = rng.normal(size=(len(t), 3))
                off[:, f] = 0
                off *= r / np.maximum(np.linalg.norm(off, axis=1, keepdims=True), 1e-300)
                P.append(X + off)
    return np.vstack(P)


def _signed_norms(m, W, P):
    """|omega|^g where -omega^sharp is future causal, else -inf, at each point."""
    G, O = m.forms(P)
    S = -np.linalg.solve(G, W[..., None])[..., 0]    # -omega^sharp
    q = np.einsum("ki,kij,kj->k", S, G, S)
    fut = np.einsum("ki,kij,kj->k", S, G, O) < 0
    ok = (q <= 1e-12 * np.einsum("ki,ki->k", S, S)) & fut
    out = np.sqrt(np.maximum(-q, 0.0))
    out[~ok] = NEG_INF
    return out, q


def l_infty(m, omega, points=None, refine=True, seed=0):
    """min over the torus of |omega_p|^g, or -inf if -omega^sharp fails to be future causal.

    omega is a constant covector or a Calibration (whose closed form is used).
    The sampled minimum is polished by local minimisation from the worst points.
    """
    P = probe_points(m, seed=seed) if points is None else np.atleast_2d(points)
    form = omega.omega if isinstance(omega, Calibration) else \
        (lambda X, w=np.asarray(omega, float): np.tile(w, (len(np.atleast_2d(X)), 1)))
    vals, _ = _signed_norms(m, form(P), P)
    if not np.all(np.isfinite(vals)):
        return NEG_INF
    if refine:
        def f(x):
            x = x[None]
            return _signed_norms(m, form(x), x)[0][0]

        for i in np.argsort(vals)[:3]:
            r = minimize(f, P[i], method="Nelder-Mead", options={"xatol": 1e-9, "fatol": 1e-12,
                                                                 "maxiter": 400})
            if not np.isfinite(r.fun):
                return NEG_INF
            vals = np.append(vals, r.fun)
    return float(vals.min())


def fourier_modes(n, degree):
    """Integer frequency vectors with max-norm <= degree, one per +-pair."""
    out = []
    for k in np.ndindex(*(2 * degree + 1,) * n):
        k = np.array(k) - degree
        nz = np.flatnonzero(k)
        if nz.size and k[nz[0]] > 0:
            out.append(k)
    return out


def duality_check(m, alpha, lstar, degree=2, trials=200, scale=0.05, seed=0, tol=1e-9,
                  points=None, pool=None):
    """Search representatives alpha + dphi for the largest l_infinity.

    The one-sided bound l_infinity <= lstar must hold for every representative tried.
    """
    rng = np.random.default_rng(seed)
    alpha = np.asarray(alpha, float)
    ks = fourier_modes(len(alpha), degree)
    P = probe_points(m, seed=seed) if points is None else points
    cands = [Calibration(alpha, [])]
    for _ in range(trials):
        amp = scale * rng.uniform() / (1 + np.array([k @ k for k in ks], float))
        c = rng.normal(size=(len(ks), 2)) * amp[:, None]
        cands.append(Calibration(alpha, [(k, a, b) for k, (a, b) in zip(ks, c)]))

    def run(cal):
        return l_infty(m, cal, P, refine=False)

    vals = list(pool.map(run, cands)) if pool is not None else [run(c) for c in cands]
    vals = np.array(vals)
    best = int(np.argmax(vals))
    viol = int(np.sum(vals > lstar + tol))
    return {"alpha": alpha.tolist(), "lstar": lstar, "tried": len(cands), "best": float(vals[best]),
            "best_modes": cands[best].as_dict()["modes"], "violations": viol,
            "finite": int(np.sum(np.isfinite(vals))), "gap": float(lstar - vals[best]),
            "pass": viol == 0}


def boundary_flowline_witness(cal, delta=1e-3, samples=20001):
    """Integral of omega along the X1 flowline of the boundary 2-torus from x = 1 - delta to delta.

    The curve is causal with x-displacement -(1 - 2 delta); a negative integral
    shows that -omega^sharp cannot be future causal everywhere.
    """
    # along the flowline cot(pi x) grows linearly in y
    c0, c1 = 1 / math.tan(math.pi * (1 - delta)), 1 / math.tan(math.pi * delta)
    y = np.linspace(0, (c1 - c0) / math.pi, samples)
    x = np.arctan2(1.0, c0 + math.pi * y) / math.pi
    X = np.column_stack([x, y])
    integral = float(cal.tau(X[-1:])[0] - cal.tau(X[:1])[0])
    return {"delta": delta, "integral": integral, "y_length": float(y[-1]), "negative": integral < 0}


def write_report(rep, fname):
    with open(fname, "w") as fh:
        json.dump(rep, fh, indent=2, sort_keys=True)
    return fname
