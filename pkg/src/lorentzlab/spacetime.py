"""Torus spacetimes: metric families, causal classification and curve lengths.

All metrics live on the cover R^n of the torus T^n and are Z^n-periodic. The
background Riemannian metric is the Euclidean one.
"""
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import _kernels as K
from .errors import ConditionViolated, NonCausalSegment, NonPositiveConformalFactor

VALIDATION_MARGIN = 1e-12
EDGE_MARGIN = -1e-8
LIGHTLIKE_TOL = 1e-12


class CausalClass(str, Enum):
    TIMELIKE_FUTURE = "timelike-future"
    TIMELIKE_PAST = "timelike-past"
    LIGHTLIKE_FUTURE = "lightlike-future"
    LIGHTLIKE_PAST = "lightlike-past"
    SPACELIKE = "spacelike"
    ZERO = "zero"


@dataclass(frozen=True)
class TangentVector:
    base: np.ndarray
    comp: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "base", np.asarray(self.base, dtype=float))
        object.__setattr__(self, "comp", np.asarray(self.comp, dtype=float))


class MetricField:
    """Periodic Lorentzian metric on R^n with a future reference field.

    Shipped families are evaluated by compiled kernels (kind, params). A custom
    metric can be supplied through vectorised callables g_fn(P) -> (m,n,n) and
    orient_fn(P) -> (m,n); those use the slower numpy code paths.
    """

    def __init__(self, dim, kind, params=(), temporal=None, name="custom",
                 g_fn=None, orient_fn=None, fd_step=1e-5, meta=None):
        self.dim = int(dim)
        self.kind = int(kind)
        self.params = np.ascontiguousarray(params, dtype=float)
        if temporal is None:
            temporal = np.eye(self.dim, dtype=np.int64)[0]
        self.temporal = np.asarray(temporal, dtype=np.int64)
        self.name = name
        self.fd_step = fd_step
        self.deriv_mode = "analytic" if kind in (K.CONST, K.CONFORMAL) else "finite-difference"
        self._g_fn = g_fn
        self._orient_fn = orient_fn
        self.meta = dict(meta or {})
        if kind == K.CUSTOM and (g_fn is None or orient_fn is None):
            raise ValueError("custom metrics need g_fn and orient_fn")

    @property
    def compiled(self):
        return self.kind != K.CUSTOM

    def forms(self, P):
        """Metric forms and future reference vectors at the rows of P."""
        P = np.ascontiguousarray(np.atleast_2d(P), dtype=float)
        if self.compiled:
            return K.metric_batch(self.kind, self.params, P)
        return np.asarray(self._g_fn(P), float), np.asarray(self._orient_fn(P), float)

    def g_at(self, p):
        return self.forms(p)[0][0]

    def orient(self, p):
        return self.forms(p)[1][0]

    def gR_at(self, p):
        return np.eye(self.dim)

    def __repr__(self):
        return f"MetricField({self.name}, dim={self.dim})"


def _quad(G, u, v):
    return np.einsum("...i,...ij,...j->...", u, G, v)


def classify(m, v, tol=LIGHTLIKE_TOL):
    """Causal character of a tangent vector."""
    comp = v.comp
    nrm2 = float(comp @ comp)
    if nrm2 == 0.0:
        return CausalClass.ZERO
    G, O = m.forms(v.base)
    q = float(comp @ G[0] @ comp)
    s = float(comp @ G[0] @ O[0])
    if abs(q) < tol * nrm2:
        return CausalClass.LIGHTLIKE_FUTURE if s < 0 else CausalClass.LIGHTLIKE_PAST
    if q < 0:
        return CausalClass.TIMELIKE_FUTURE if s < 0 else CausalClass.TIMELIKE_PAST
    return CausalClass.SPACELIKE


@dataclass
class CausalPath:
    """Polyline in the cover, parametrised by Euclidean arclength."""

    vertices: np.ndarray
    param: np.ndarray = None
    tangents: np.ndarray = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.vertices = np.atleast_2d(np.asarray(self.vertices, dtype=float))
        if self.param is None:
            seg = np.linalg.norm(np.diff(self.vertices, axis=0), axis=1)
            self.param = np.concatenate([[0.0], np.cumsum(seg)])
        else:
            self.param = np.asarray(self.param, dtype=float)

    @property
    def dim(self):
        return self.vertices.shape[1]

    @property
    def start(self):
        return self.vertices[0]

    @property
    def end(self):
        return self.vertices[-1]

    @property
    def L_R(self):
        return float(np.linalg.norm(np.diff(self.vertices, axis=0), axis=1).sum())

    def __len__(self):
        return len(self.vertices)

    def concat(self, other):
        if not np.allclose(self.end, other.start, atol=1e-12):
            raise ValueError("paths do not join")
        return CausalPath(np.vstack([self.vertices, other.vertices[1:]]))

    def sub(self, i, j):
        return CausalPath(self.vertices[i:j + 1].copy())

    def simplified(self):
        """Drop vertices interior to straight runs."""
        V = self.vertices
        if len(V) < 3:
            return CausalPath(V.copy())
        keep = [0]
        for i in range(1, len(V) - 1):
            a = V[i] - V[keep[-1]]
            b = V[i + 1] - V[i]
            na, nb = np.linalg.norm(a), np.linalg.norm(b)
            if na == 0 or nb == 0:
                continue
            if np.linalg.norm(a / na - b / nb) > 1e-12:
                keep.append(i)
        keep.append(len(V) - 1)
        return CausalPath(V[keep].copy())


_RULES = {"midpoint": 0, "simpson": 1, "auto": 2}


def pair_lengths(m, A, B, rule="midpoint", margin=VALIDATION_MARGIN):
    """Lengths of the straight segments A[i] -> B[i]; -1 marks a segment failing the margin."""
    A = np.ascontiguousarray(A, dtype=float)
    B = np.ascontiguousarray(B, dtype=float)
    r = _RULES[rule]
    if m.compiled:
        return K.pair_lengths(m.kind, m.params, A, B, r, margin)
    d = B - A
    G, O = m.forms(0.5 * (A + B))
    q = _quad(G, d, d)
    s = _quad(G, d, O)
    nn = np.einsum("ij,ij->i", d, d)
    f = np.sqrt(np.maximum(0.0, -q))
    if r == 1:
        fa = np.sqrt(np.maximum(0.0, -_quad(m.forms(A)[0], d, d)))
        fb = np.sqrt(np.maximum(0.0, -_quad(m.forms(B)[0], d, d)))
        f = (fa + 4 * f + fb) / 6
    bad = (nn > 0) & ((q > margin * nn) | (s >= 0))
    f[nn == 0] = 0.0
    f[bad] = -1.0
    return f


def segment_lengths(m, V, rule="midpoint", margin=VALIDATION_MARGIN):
    """Per-segment Lorentzian lengths of a polyline; -1 marks a segment failing the margin."""
    V = np.ascontiguousarray(V, dtype=float)
    if m.compiled:
        return K.polyline_lengths(m.kind, m.params, V, _RULES[rule], margin)
    return pair_lengths(m, V[:-1], V[1:], rule, margin)


def validate_path(m, path, margin=VALIDATION_MARGIN):
    """Raise NonCausalSegment at the first segment that is not future causal."""
    seg = segment_lengths(m, path.vertices, "midpoint", margin)
    bad = np.flatnonzero(seg < 0)
    if bad.size:
        i = int(bad[0])
        raise NonCausalSegment(f"segment {i} from {path.vertices[i]} to {path.vertices[i + 1]}")
    return True


def lorentz_length(m, path, rule="midpoint", subdivisions=1, margin=VALIDATION_MARGIN):
    """Lorentzian length by composite quadrature over the polyline."""
    V = path.vertices
    if len(V) < 2:
        return 0.0
    if subdivisions > 1:
        t = np.linspace(0, 1, subdivisions + 1)[:-1]
        parts = [V[:-1] + ti * np.diff(V, axis=0) for ti in t]
        V = np.vstack([np.stack(parts, axis=1).reshape(-1, V.shape[1]), V[-1:]])
    seg = segment_lengths(m, V, rule, margin)
    bad = np.flatnonzero(seg < 0)
    if bad.size:
        raise NonCausalSegment(f"segment {int(bad[0])} violates the causality margin")
    return float(seg.sum())


def lorentz_length_checked(m, path, rule="midpoint"):
    """Length with a Richardson error estimate from one midpoint refinement."""
    a = lorentz_length(m, path, rule)
    b = lorentz_length(m, path, rule, subdivisions=2)
    return b + (b - a) / 3.0, abs(b - a) / 3.0


def sample_cone(G, O, rng, boundary_fraction=0.1):
    """Random future causal unit vectors for a batch of forms G (m,n,n)."""
    m, n, _ = G.shape
    lam, Q = np.linalg.eigh(G)
    a = np.ones(m)
    b = rng.normal(size=(m, n - 1))
    b /= np.linalg.norm(b, axis=1, keepdims=True)
    r = rng.uniform(0, 1, size=m) ** (1.0 / (n - 1))
    r[rng.uniform(size=m) < boundary_fraction] = 1.0
    b *= r[:, None]
    coef = np.empty((m, n))
    coef[:, 0] = a / np.sqrt(np.abs(lam[:, 0]))
    coef[:, 1:] = b / np.sqrt(np.abs(lam[:, 1:]))
    v = np.einsum("mij,mj->mi", Q, coef)
    flip = _quad(G, v, O) > 0
    v[flip] *= -1
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def signature_ok(G, tol=0.0):
    lam = np.linalg.eigvalsh(G)
    return (lam[..., 0] < -tol) & np.all(lam[..., 1:] > tol, axis=-1)


# ---------------------------------------------------------------- families

def make_flat(n):
    """Minkowski form -dx0^2 + sum dxi^2 on the n-torus."""
    G = np.eye(n)
    G[0, 0] = -1.0
    o = np.eye(n)[0]
    meta = {"ell": lambda h: float(np.sqrt(max(0.0, -_quad(G, h, h)))) if h[0] > 0 else 0.0}
    if n == 2:
        meta["cone"] = np.array([[1.0, 1.0], [1.0, -1.0]])
    return MetricField(n, K.CONST, np.concatenate([G.ravel(), o]), name=f"flat{n}", meta=meta)


def make_constant(G, orient, temporal, name="constant"):
    G = np.asarray(G, float)
    return MetricField(G.shape[0], K.CONST, np.concatenate([G.ravel(), np.asarray(orient, float)]),
                       temporal=temporal, name=name)


class TrigPoly:
    """Real trigonometric polynomial c0 + sum a cos(2 pi k.x + phase) on the torus."""

    def __init__(self, n, c0=1.0, modes=()):
        self.n = n
        self.c0 = float(c0)
        self.modes = [(np.asarray(k, float), float(a), float(ph)) for k, a, ph in modes]

    @classmethod
    def sine(cls, n, axis, amp, c0=1.0, freq=1):
        k = np.zeros(n)
        k[axis] = freq
        return cls(n, c0, [(k, amp, -np.pi / 2)])

    def params(self):
        out = [self.c0, len(self.modes)]
        for k, a, ph in self.modes:
            out.extend(k)
            out.extend([a, ph])
        return np.array(out, float)

    def __call__(self, X):
        X = np.atleast_2d(X)
        f = np.full(len(X), self.c0)
        for k, a, ph in self.modes:
            f += a * np.cos(2 * np.pi * X @ k + ph)
        return f

    def lower_bound(self):
        return self.c0 - sum(abs(a) for _, a, _ in self.modes)


def make_conformally_flat(n, f, samples=4096, seed=0):
    """The metric f^2 <.,.>_1 for a positive periodic trigonometric polynomial f."""
    if not isinstance(f, TrigPoly):
        raise TypeError("f must be a TrigPoly")
    if f.lower_bound() <= 0:
        rng = np.random.default_rng(seed)
        if f(rng.uniform(size=(samples, n))).min() <= 0:
            raise NonPositiveConformalFactor("conformal factor is not positive")
    return MetricField(n, K.CONFORMAL, f.params(), name="conformal", meta={"factor": f})


def make_boundary_2torus():
    """2-torus whose null directions are X1 = (-sin^2 pi x, 1) and X2 = (1, sin^2 pi y)."""
    return MetricField(2, K.BOUNDARY2, np.zeros(1), temporal=np.array([1, 2]), name="boundary2",
                       meta={"cone": np.eye(2)})


def boundary_frame(p):
    x, y = p[..., 0], p[..., 1]
    sx, sy = np.sin(np.pi * x) ** 2, np.sin(np.pi * y) ** 2
    return np.stack([-sx, np.ones_like(sx)], -1), np.stack([np.ones_like(sy), sy], -1)


# ---------------------------------------------------------------- Hedlund

@dataclass
class HedlundParams:
    lambdas: tuple
    eps: float = 0.01
    bump: str = "exp"
    psi_peak: float = 1.0

    def __post_init__(self):
        lam = np.asarray(self.lambdas, float)
        if lam.shape != (3,) or np.any(lam <= 0):
            raise ValueError("lambdas must be three positive numbers")
        if not self.eps > 0:
            raise ValueError("eps must be positive")
        self.lambdas = tuple(lam / lam.sum())

    @property
    def conforming(self):
        return self.eps <= 1e-2

    @property
    def lam(self):
        return np.array(self.lambdas)


def base_form(eps):
    G = np.empty((3, 3))
    K.hedlund_base_form(eps, G)
    return G


def line_form(lam, i):
    G = np.empty((3, 3))
    K.hedlund_line_form(lam, i, G)
    return G


def v1_margins(params):
    """g_i(v1,v1) - g_eps(v1,v1) = -lambda_i^2/9 + eps^2/4 per family."""
    return [-(l ** 2) / 9 + params.eps ** 2 / 4 for l in params.lambdas]


def make_hedlund(params, verify=True, samples=20000, seed=0):
    """Tube metric: g_eps blended towards g_i inside B_eps(L_i) by the bump profile."""
    m = MetricField(3, K.HEDLUND, [*params.lambdas, params.eps, params.psi_peak],
                    temporal=np.array([1, 1, 1]), name="hedlund",
                    meta={"params": params, "cone": np.eye(3), "stencil_k": 1,
                          "ell": lambda h: float(params.lam @ h)})
    if verify:
        rep = verify_hedlund(m, params, samples, seed)
        if not rep["pass"]:
            failed = [k for k in ("i", "ii", "iii") if not rep[k]["pass"]]
            raise ConditionViolated(f"conditions {failed} fail: {rep}")
    return m


def tube_distances(P):
    """Distances of the rows of P to the line families L1, L2, L3."""
    P = np.atleast_2d(P)

    def fr(x):
        return x - np.floor(x + 0.5)

    d1 = np.hypot(fr(P[:, 1]), fr(P[:, 2]))
    d2 = np.hypot(fr(P[:, 0]), fr(P[:, 2] - 0.5))
    d3 = np.hypot(fr(P[:, 0] - 0.5), fr(P[:, 1] - 0.5))
    return np.stack([d1, d2, d3], axis=1)


def _points_near_lines(rng, count, radius, family):
    t = rng.uniform(-2, 2, count)
    r = radius * rng.uniform(0, 1, count)
    th = rng.uniform(0, 2 * np.pi, count)
    shift = rng.integers(-2, 3, size=(count, 3)).astype(float)
    P = np.zeros((count, 3))
    base = [(0, 0, 0), (0, 0, 0.5), (0.5, 0.5, 0)][family]
    a, b = [(1, 2), (0, 2), (0, 1)][family]
    P[:, family] = t
    P[:, a] = base[a] + r * np.cos(th)
    P[:, b] = base[b] + r * np.sin(th)
    return P + shift * (np.arange(3) != family)


def verify_hedlund(m, params, samples=100000, seed=0):
    """Sampled check of the three ordering conditions (cone inclusion plus length domination)."""
    rng = np.random.default_rng(seed)
    eps = params.eps
    ge = base_form(eps)
    g2e = base_form(2 * eps)
    v1 = np.ones(3) / np.sqrt(3)
    tol = 1e-13
    per = max(samples // 4, 1)

    # (i): everywhere, with extra weight inside the tubes
    P = np.vstack([rng.uniform(-2, 2, (per // 4, 3))]
                  + [_points_near_lines(rng, per // 4, eps, f) for f in range(3)])
    Ge = np.broadcast_to(ge, (len(P), 3, 3))
    Oe = np.broadcast_to(v1, (len(P), 3))
    V = sample_cone(np.ascontiguousarray(Ge), np.ascontiguousarray(Oe), rng)
    G, O = m.forms(P)
    qb, qe = _quad(G, V, V), _quad(Ge, V, V)
    marg = qe - qb
    fut = _quad(G, V, O) < 0
    ok_i = bool(np.all(marg >= -tol) & np.all(fut))
    sig = signature_ok(G)

    # (ii): outside the tubes the blended metric is g_eps, compared with g_2eps
    P2 = rng.uniform(-2, 2, (4 * per, 3))
    d = tube_distances(P2)
    P2 = P2[d.min(axis=1) >= eps][:per]
    G2, O2 = m.forms(P2)
    V2 = sample_cone(G2, O2, rng)
    marg2 = _quad(G2, V2, V2) - _quad(np.broadcast_to(g2e, G2.shape), V2, V2)
    fut2 = V2 @ g2e @ v1 < 0
    ok_ii = bool(np.all(marg2 >= -tol) & np.all(fut2))

    # (iii): inside B_eps(L_i), compared with g_i; equality exactly on L_i
    worst3, ok3, eq_on, neq_off = [], [], [], []
    for f in range(3):
        gi = line_form(params.lambdas[f], f)
        P3 = _points_near_lines(rng, per // 3, eps * (1 - 1e-9), f)
        G3, O3 = m.forms(P3)
        V3 = sample_cone(G3, O3, rng)
        mg = _quad(G3, V3, V3) - _quad(np.broadcast_to(gi, G3.shape), V3, V3)
        fut3 = _quad(np.broadcast_to(gi, G3.shape), V3, O3) < 0
        worst3.append(float(mg.min()))
        ok3.append(bool(np.all(mg >= -tol) & np.all(fut3)))
        on = _points_near_lines(rng, 64, 0.0, f)
        eq_on.append(float(np.abs(m.forms(on)[0] - gi).max()))
        off = P3[tube_distances(P3)[:, f] > 1e-9]
        neq_off.append(float(np.abs(m.forms(off)[0] - gi).max(axis=(1, 2)).min()))
    eq_ok = max(eq_on) == 0.0 and min(neq_off) > 0.0
    ok_iii = all(ok3) and eq_ok

    rep = {
        "i": {"pass": ok_i, "worst_margin": float(marg.min()), "samples": int(len(P))},
        "ii": {"pass": ok_ii, "worst_margin": float(marg2.min()), "samples": int(len(P2))},
        "iii": {"pass": ok_iii, "worst_margin": min(worst3), "cone_ok": ok3,
                "equality_on_lines_maxdiff": eq_on, "min_offline_diff": neq_off,
                "equality_exact": eq_ok},
        "signature_ok": bool(np.all(sig) and np.all(signature_ok(G2))),
        "v1_margins": v1_margins(params),
        "conforming": params.conforming,
    }
    rep["pass"] = ok_i and ok_ii and ok_iii and rep["signature_ok"]
    return rep
