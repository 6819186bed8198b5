"""Tube geometry of the three-family line metric on T^3.

Family f consists of the lines parallel to e_f through base + Z^3, with bases
(0,0,0), (0,0,1/2) and (1/2,1/2,0). Maximizers run along these lines and
switch between them by short jumps in the direction (1,1,1).
"""
import csv
import math
from itertools import product
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .errors import NonCausalSegment, NotConstructible
from .reach import build_graph, run_dp, write_path_csv
from .spacetime import (VALIDATION_MARGIN, CausalPath, base_form, line_form, sample_cone, segment_lengths,
                        tube_distances, validate_path)

BASES = np.array([[0.0, 0.0, 0.0], [0.0, 0.0, 0.5], [0.5, 0.5, 0.0]])
JUMP = np.array([0.5, 0.5, 0.5])
_TOL = 1e-9


def _others(f):
    return [a for a in range(3) if a != f]


@dataclass(frozen=True)
class Line:
    family: int
    fixed: tuple  # coordinates on the two axes other than `family`

    def point(self, t):
        p = np.empty(3)
        a, b = _others(self.family)
        p[self.family] = t
        p[a], p[b] = self.fixed
        return p

    def coord(self, axis):
        if axis == self.family:
            raise ValueError("free coordinate")
        a, b = _others(self.family)
        return self.fixed[0] if axis == a else self.fixed[1]

    def distance(self, P):
        P = np.atleast_2d(P)
        a, b = _others(self.family)
        return np.hypot(P[:, a] - self.fixed[0], P[:, b] - self.fixed[1])


class LineSystem:
    """Queries on the union L of the three line families."""

    def __init__(self, eps=0.01):
        self.eps = eps

    @staticmethod
    def line_through(p, family, tol=_TOL):
        """The family line containing p, or None."""
        p = np.asarray(p, float)
        a, b = _others(family)
        fa, fb = p[a] - BASES[family, a], p[b] - BASES[family, b]
        if abs(fa - round(fa)) > tol or abs(fb - round(fb)) > tol:
            return None
        return Line(family, (BASES[family, a] + round(fa), BASES[family, b] + round(fb)))

    @staticmethod
    def nearest(P):
        """(family, Line, distance) of the nearest line for each row of P."""
        P = np.atleast_2d(np.asarray(P, float))
        D = tube_distances(P)
        fam = np.argmin(D, axis=1)
        out = []
        for p, f, d in zip(P, fam, D[np.arange(len(P)), fam]):
            a, b = _others(f)
            fixed = (BASES[f, a] + np.floor(p[a] - BASES[f, a] + 0.5),
                     BASES[f, b] + np.floor(p[b] - BASES[f, b] + 0.5))
            out.append((int(f), Line(int(f), fixed), float(d)))
        return out

    def families_of(self, p):
        return [f for f in range(3) if self.line_through(p, f) is not None]

    def component_labels(self, P):
        """Tube component label per row: (family, c1, c2) or None outside B_eps(L)."""
        labels = []
        for f, line, d in self.nearest(P):
            labels.append((f, *line.fixed) if d < self.eps else None)
        return labels


# ---------------------------------------------------------------- standard paths

def chain_path(p, q, families):
    """Path along lines of the given families joined by (1/2,1/2,1/2) jumps.

    p lies on a line of families[0], q on one of families[-1]. Run lengths on
    axes visited once are forced by q - p; when the first and last family
    coincide their run is split as evenly as the lattice allows.
    """
    p, q = np.asarray(p, float), np.asarray(q, float)
    h = q - p
    m = len(families) - 1
    if LineSystem.line_through(p, families[0]) is None:
        raise NotConstructible(f"{p} is not on a family-{families[0] + 1} line")
    if LineSystem.line_through(q, families[-1]) is None:
        raise NotConstructible(f"{q} is not on a family-{families[-1] + 1} line")
    for a, b in zip(families[:-1], families[1:]):
        if a == b:
            raise NotConstructible("consecutive families must differ")
    totals = h - 0.5 * m
    counts = [families.count(a) for a in range(3)]
    for a in range(3):
        if counts[a] == 0 and abs(totals[a]) > _TOL:
            raise NotConstructible(f"axis {a + 1} needs a run but no line of family {a + 1} is used")
    runs = np.zeros(m + 1)
    x = p.copy()
    verts = [x.copy()]
    for t in range(m):
        f, g = families[t], families[t + 1]
        # landing on a family-g line fixes the run modulo 1
        res = (BASES[g, f] - (x[f] + 0.5)) % 1.0
        if counts[f] == 1:
            r = totals[f]
        else:
            later = [s for s in range(t + 1, m + 1) if families[s] == f]
            share = totals[f] / (1 + len(later))
            r = res + math.floor(max(share - res, 0.0) + _TOL)
        if r < -_TOL or abs(((r - res + 0.5) % 1.0) - 0.5) > 1e-7:
            raise NotConstructible(f"run {t} on family {f + 1} cannot reach a family-{g + 1} line")
        r = max(r, 0.0)
        runs[t] = r
        totals[f] -= r
        if r > 0:
            x = x.copy()
            x[f] += r
            verts.append(x.copy())
        x = x + JUMP
        if LineSystem.line_through(x, g, 1e-7) is None:
            raise NotConstructible(f"jump {t} does not land on a family-{g + 1} line")
        verts.append(x.copy())
    f = families[-1]
    r = totals[f]
    runs[m] = r
    if r < -_TOL or np.any(np.abs(np.delete(totals, f)) > 1e-7):
        raise NotConstructible("displacement is not compatible with the chain")
    if r > _TOL:
        verts.append(q.copy())
    V = np.array(verts)
    V[-1] = q
    # drop duplicate points produced by zero runs
    keep = np.concatenate([[True], np.linalg.norm(np.diff(V, axis=0), axis=1) > 1e-12])
    return CausalPath(V[keep], meta={"families": list(families), "runs": runs.tolist()})


def standard_path(p, q, i=None, j=None):
    """Canonical path from p on an i-line to q on a different j-line.

    Five segments when the third component of q - p is at least 1, three when
    it equals 1/2.
    """
    p, q = np.asarray(p, float), np.asarray(q, float)
    if i is None:
        fi = LineSystem().families_of(p)
        i = fi[0] if fi else None
    if j is None:
        fj = [f for f in LineSystem().families_of(q) if f != i]
        j = fj[0] if fj else None
    if i is None or j is None or i == j:
        raise NotConstructible("endpoints must lie on lines of two different families")
    h = q - p
    if np.any(h < 0.5 - _TOL):
        raise NotConstructible(f"all components of q - p must be at least 1/2, got {h}")
    k = 3 - i - j
    if abs(h[k] - 0.5) < _TOL:
        return chain_path(p, q, [i, j])
    if h[k] >= 1 - _TOL:
        if h[i] < 1 - _TOL or h[j] < 1 - _TOL:
            raise NotConstructible("the five-segment path needs the i and j components >= 1")
        return chain_path(p, q, [i, k, j])
    raise NotConstructible(f"component {k + 1} of q - p must be 1/2 or at least 1")


def guide_path(p, q):
    """A causal line-and-jump path from p to q (standard path or a three-jump cycle)."""
    ls = LineSystem()
    fp, fq = ls.families_of(p), ls.families_of(q)
    if not fp or not fq:
        raise NotConstructible("endpoints must lie on lines")
    h = np.asarray(q, float) - np.asarray(p, float)
    nz = np.flatnonzero(np.abs(h) > _TOL)
    if len(nz) == 1 and nz[0] in fp and nz[0] in fq and h[nz[0]] > 0:
        line = ls.line_through(p, nz[0])
        if line is not None and line == ls.line_through(q, nz[0]):
            return CausalPath(np.vstack([p, q]), meta={"families": [int(nz[0])], "runs": [h[nz[0]]]})
    errors = []
    for i in fp:
        for j in fq:
            try:
                if i != j:
                    return standard_path(p, q, i, j)
                a, b = _others(i)
                for fam in ([i, a, b, i], [i, b, a, i]):
                    try:
                        return chain_path(p, q, fam)
                    except NotConstructible as e:
                        errors.append(str(e))
            except NotConstructible as e:
                errors.append(str(e))
    raise NotConstructible("; ".join(errors) or "no chain fits")


def any_chain(p, q, max_jumps=3):
    """Shortest-chain line-and-jump path from p to q, trying every family sequence."""
    ls = LineSystem()
    fp, fq = ls.families_of(p), ls.families_of(q)
    if not fp or not fq:
        raise NotConstructible("endpoints must lie on lines")
    for m in range(0, max_jumps + 1):
        for mid in product(range(3), repeat=max(m - 1, 0)):
            for i in fp:
                for j in fq:
                    fam = [i, *mid, j] if m > 0 else [i]
                    if m == 0 and i != j:
                        continue
                    if any(a == b for a, b in zip(fam[:-1], fam[1:])):
                        continue
                    try:
                        if m == 0:
                            return guide_path(p, q)
                        return chain_path(p, q, fam)
                    except NotConstructible:
                        pass
    raise NotConstructible(f"no chain with at most {max_jumps} jumps from {p} to {q}")


# ---------------------------------------------------------------- lengths

def densify(V, max_seg):
    V = np.asarray(V, float)
    out = [V[:1]]
    for a, b in zip(V[:-1], V[1:]):
        k = max(1, int(math.ceil(np.linalg.norm(b - a) / max_seg)))
        t = np.linspace(0, 1, k + 1)[1:, None]
        out.append(a + t * (b - a))
    return np.vstack(out)


def accurate_length(m, path, max_seg=0.004):
    """Lorentzian length with long segments cut below max_seg.

    Pieces near the tubes use Simpson's rule. Segments already shorter than
    max_seg (grid paths) are kept, so the value matches the graph weights.
    """
    V = densify(path.vertices, max_seg)
    seg = segment_lengths(m, V, "auto", VALIDATION_MARGIN)
    if np.any(seg < 0):
        raise NonCausalSegment("path is not future causal")
    return float(seg.sum())


# ---------------------------------------------------------------- tube intervals

def _line_intervals(a, b, eps):
    """Parameter intervals (in [0,1]) of segment a->b inside B_eps of each nearby line."""
    out = []
    lo = np.minimum(a, b) - eps
    hi = np.maximum(a, b) + eps
    d = b - a
    for f in range(3):
        ax, bx = _others(f)
        ra = np.arange(math.ceil(lo[ax] - BASES[f, ax]), math.floor(hi[ax] - BASES[f, ax]) + 1)
        rb = np.arange(math.ceil(lo[bx] - BASES[f, bx]), math.floor(hi[bx] - BASES[f, bx]) + 1)
        for ia in ra:
            ca = BASES[f, ax] + ia
            for ib in rb:
                cb = BASES[f, bx] + ib
                # |(a + s d) - c|^2 on the two transverse axes
                u0 = np.array([a[ax] - ca, a[bx] - cb])
                u1 = np.array([d[ax], d[bx]])
                A = u1 @ u1
                B = 2 * u0 @ u1
                C = u0 @ u0 - eps * eps
                if A < 1e-300:
                    if C <= 0:
                        out.append((0.0, 1.0, (f, float(ca), float(cb))))
                    continue
                disc = B * B - 4 * A * C
                if disc < 0:
                    continue
                sq = math.sqrt(disc)
                s0, s1 = (-B - sq) / (2 * A), (-B + sq) / (2 * A)
                s0, s1 = max(s0, 0.0), min(s1, 1.0)
                if s0 <= s1:
                    out.append((s0, s1, (f, float(ca), float(cb))))
    return out


def tube_intervals(path, eps):
    """Arclength intervals of the path inside closed eps-tubes, with their component."""
    V = path.vertices
    s = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(V, axis=0), axis=1))])
    raw = []
    for i in range(len(V) - 1):
        L = s[i + 1] - s[i]
        for s0, s1, comp in _line_intervals(V[i], V[i + 1], eps):
            raw.append((s[i] + s0 * L, s[i] + s1 * L, comp))
    raw.sort(key=lambda r: (r[2], r[0]))
    merged = []
    for a, b, c in raw:
        if merged and merged[-1][2] == c and a <= merged[-1][1] + 1e-12:
            merged[-1] = (merged[-1][0], max(merged[-1][1], b), c)
        else:
            merged.append((a, b, c))
    merged.sort(key=lambda r: r[0])
    return merged, float(s[-1])


def _union(iv):
    iv = sorted(iv)
    out = []
    for a, b in iv:
        if out and a <= out[-1][1] + 1e-12:
            out[-1][1] = max(out[-1][1], b)
        else:
            out.append([a, b])
    return [tuple(x) for x in out]


@dataclass
class TubePartition:
    changes: int
    sequence: list
    A: list
    A_fam: list
    length: float
    intervals: list = field(default_factory=list)


def count_tube_changes(path, eps):
    """Number of tube changes and the partition of the parameter interval.

    A_f collects the time spent in closed family-f tubes plus excursions that
    leave and re-enter the same tube; A is what remains.
    """
    iv, total = tube_intervals(path, eps)
    seq = []
    for a, b, c in iv:
        if not seq or seq[-1] != c:
            seq.append(c)
    A_fam = []
    for f in range(3):
        mine = [(a, b, c) for a, b, c in iv if c[0] == f]
        parts = [(a, b) for a, b, _ in mine]
        for (a0, b0, c0), (a1, b1, c1) in zip(mine[:-1], mine[1:]):
            if c0 == c1:
                parts.append((b0, a1))
        A_fam.append(_union(parts))
    covered = _union([x for fam in A_fam for x in fam])
    A = []
    t = 0.0
    for a, b in covered:
        if a > t + 1e-15:
            A.append((t, a))
        t = max(t, b)
    if t < total - 1e-15:
        A.append((t, total))
    return TubePartition(len(seq) - 1 if seq else 0, seq, A, A_fam, total, iv)


def point_at(path, s):
    """Point at Euclidean arclength s."""
    V = path.vertices
    cs = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(V, axis=0), axis=1))])
    s = np.atleast_1d(s)
    i = np.clip(np.searchsorted(cs, s, side="right") - 1, 0, len(V) - 2)
    L = cs[i + 1] - cs[i]
    t = np.divide(s - cs[i], L, out=np.zeros_like(s, dtype=float), where=L > 0)
    return V[i] + t[:, None] * (V[i + 1] - V[i])


# ---------------------------------------------------------------- checks

def check_F30(path, eps):
    """2(sum (q-p)^i + 4 eps) - Euclidean length."""
    h = path.end - path.start
    return float(2 * (h.sum() + 4 * eps) - path.L_R)


def check_L31(m, path, partition=None, length=None):
    """Both sides of the A-integral bound.

    Returns a dict with the left side, the right side with the factor (1-8 eps),
    and the right side with the factor the estimate chain actually yields,
    1/(1 - 8 eps/(1-4 eps) - eps).
    """
    eps = m.params[3]
    lam = m.params[:3]
    part = partition or count_tube_changes(path, eps)
    lhs = 0.0
    for a, b in part.A:
        pa, pb = point_at(path, [a, b])
        lhs += float(lam @ (pb - pa))
    Lg = accurate_length(m, path) if length is None else length
    h = path.end - path.start
    core = float(lam @ h) - Lg + 4 * eps
    rhs_lit = (1 - 8 * eps) * core
    c = 1 - 8 * eps / (1 - 4 * eps) - eps
    rhs_cor = core / c
    return {"lhs": lhs, "rhs_literal": rhs_lit, "slack_literal": rhs_lit - lhs,
            "rhs_corrected": rhs_cor, "slack_corrected": rhs_cor - lhs,
            "length": Lg, "A_components": len(part.A)}


def hausdorff(P, Q):
    tp, tq = cKDTree(P), cKDTree(Q)
    return float(max(tq.query(P)[0].max(), tp.query(Q)[0].max()))


def shadowing_check(path, eps, reference=None, sample=None):
    """Hausdorff distance between a path and the standard path on its endpoints."""
    ref = reference if reference is not None else standard_path(path.start, path.end)
    step = sample or eps / 10
    return hausdorff(densify(path.vertices, step), densify(ref.vertices, step))


def tube_confinement_check(path, line, delta, sample=None):
    """Smallest r with the path inside B_delta(line) away from end windows of length r."""
    V = densify(path.vertices, sample or delta / 4)
    s = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(V, axis=0), axis=1))])
    out = line.distance(V) > delta
    if not np.any(out):
        return 0.0
    so = s[out]
    return float(np.max(np.minimum(so - s[0], s[-1] - so)))


def eps_prime(m, family, samples=4000, grid=40, seed=0):
    """Largest radius where g dominates (lambda^2/3)(-(dx^f)^2 + other squares), sampled."""
    rng = np.random.default_rng(seed)
    lam = m.params[family]
    eps = m.params[3]
    H = np.eye(3) * lam * lam / 3
    H[family, family] *= -1
    o = np.zeros(3)
    o[family] = 1.0
    ok_r = 0.0
    for r in np.linspace(eps / grid, eps, grid):
        P = _ring(rng, samples // grid + 8, r, family)
        G, _ = m.forms(P)
        V = sample_cone(np.broadcast_to(H, G.shape).copy(), np.broadcast_to(o, (len(P), 3)).copy(), rng)
        marg = np.einsum("mi,mij,mj->m", V, G, V) - np.einsum("mi,ij,mj->m", V, H, V)
        if np.all(marg <= 1e-15):
            ok_r = r
        else:
            break
    return ok_r if ok_r > 0 else eps / 2


def _ring(rng, count, r, family):
    th = rng.uniform(0, 2 * np.pi, count)
    P = np.zeros((count, 3))
    a, b = _others(family)
    P[:, family] = rng.uniform(0, 1, count)
    P[:, a] = BASES[family, a] + r * np.cos(th)
    P[:, b] = BASES[family, b] + r * np.sin(th)
    return P


def eta_fit(m, family, delta, samples=20000, seed=0):
    """lambda_f minus the largest ratio sqrt|g(v,v)|/v^f over B_eps minus B_delta."""
    rng = np.random.default_rng(seed)
    eps = m.params[3]
    lam = m.params[family]
    r = np.sqrt(rng.uniform(delta ** 2, eps ** 2, samples))
    P = np.zeros((samples, 3))
    th = rng.uniform(0, 2 * np.pi, samples)
    a, b = _others(family)
    P[:, family] = rng.uniform(0, 1, samples)
    P[:, a] = BASES[family, a] + r * np.cos(th)
    P[:, b] = BASES[family, b] + r * np.sin(th)
    G, O = m.forms(P)
    V = sample_cone(G, O, rng, boundary_fraction=0.0)
    q = np.einsum("mi,mij,mj->m", V, G, V)
    ratio = np.sqrt(np.abs(np.minimum(q, 0))) / V[:, family]
    return float(lam - ratio.max())


def connector_length_check(m, family, delta, pairs=200, seed=0):
    """Explicit in-tube curves realise d(p,q) >= lambda (q-p)^f - 2 lambda delta.

    The curve moves from p onto the line along |p-p'| e_f + (p'-p), follows
    the line, and leaves towards q along the mirrored connector. Returns the
    worst margin of its length over the bound (>= 0 expected).
    """
    rng = np.random.default_rng(seed)
    lam = m.params[family]
    line = Line(family, tuple(BASES[family, _others(family)]))
    worst = np.inf
    for _ in range(pairs):
        p = _ring(rng, 1, delta * math.sqrt(rng.uniform()), family)[0]
        q = _ring(rng, 1, delta * math.sqrt(rng.uniform()), family)[0]
        q[family] = p[family] + rng.uniform(4 * delta, 2.0)
        pp = p.copy()
        pp[_others(family)] = line.fixed
        qq = q.copy()
        qq[_others(family)] = line.fixed
        a = pp.copy()
        a[family] += np.linalg.norm(p - pp)
        b = qq.copy()
        b[family] -= np.linalg.norm(q - qq)
        if b[family] < a[family]:
            continue
        path = CausalPath(np.vstack([p, a, b, q]))
        V = densify(path.vertices, delta / 50)
        seg = segment_lengths(m, V, "simpson", 1e-12)
        if np.any(seg < 0):
            raise AssertionError("explicit in-tube connector is not causal")
        L = float(seg.sum())
        worst = min(worst, L - (lam * (q - p)[family] - 2 * lam * delta))
    return float(worst)


# ---------------------------------------------------------------- DP wrappers

def tube_maximizer(m, p, q, spacing=0.0025, radius=None, guide=None):
    """Tube-mode DP maximizer from p to q around the guide (default: guide_path)."""
    eps = m.params[3]
    radius = 8 * eps if radius is None else radius
    g = guide if guide is not None else guide_path(p, q)
    G = build_graph(m, p, q, spacing, 1, "tube", guide=g.vertices if isinstance(g, CausalPath) else g,
                    radius=radius)
    res = run_dp(G)
    d, path = res.connect(q)
    path.meta.update({"n_nodes": G.n_nodes, "guide": g})
    return d, path, res


def on_line_cuts(path, tol=1e-9):
    """Vertex indices lying on a line, with their families."""
    ls = LineSystem()
    out = []
    for i, v in enumerate(path.vertices):
        f = ls.families_of(v)
        if f:
            out.append((i, f))
    return out


def connectability_check(m, p, q, spacing=0.0025, use_dp=False):
    """Whether q is in the causal future of p, by an explicit witness path.

    The witness follows v1 from p into a tube, steps onto its line, runs the
    line-and-jump chain to a line near q, and leaves it the same way. It is
    validated segment by segment. With use_dp the tube-mode DP around the
    witness must also reach q.
    """
    p, q = np.asarray(p, float), np.asarray(q, float)
    h = q - p
    if np.all(np.abs(h) < 1e-15):
        return True
    if h.sum() <= 0:
        return False
    ls = LineSystem()
    if ls.families_of(p) and ls.families_of(q):
        try:
            w = guide_path(p, q)
            validate_path(m, CausalPath(densify(w.vertices, m.params[3] / 20)), 0.0)
            return True if not use_dp else tube_maximizer(m, p, q, spacing, guide=w)[0] > 0
        except (NotConstructible, NonCausalSegment):
            pass
    try:
        w = witness_path(m, p, q)
    except NotConstructible:
        return False
    if use_dp:
        d, _, _ = tube_maximizer(m, p, q, spacing, guide=w)
        return d > 0
    return True


def _entry(m, x, direction, skip_family=None, max_len=None):
    """Walk from x along +-v1 until within eps' of a line; return (point on walk, line)."""
    eps = m.params[3]
    max_len = max_len or 1.0 / eps
    step = eps / 8
    v = direction * np.ones(3) / math.sqrt(3)
    n = int(max_len / step)
    P = x + np.outer(np.arange(1, n + 1) * step, v)
    D = tube_distances(P)
    limit = 0.4 * eps
    for idx in range(n):
        for f in range(3):
            if f != skip_family and D[idx, f] < limit:
                return P[idx], _line_of(P[idx], f)
    raise NotConstructible("no tube within reach along v1")


def _line_of(p, f):
    a, b = _others(f)
    return Line(f, (BASES[f, a] + math.floor(p[a] - BASES[f, a] + 0.5),
                    BASES[f, b] + math.floor(p[b] - BASES[f, b] + 0.5)))


def witness_path(m, p, q):
    """Explicit causal path p -> q through two lines of different families."""
    eps = m.params[3]
    a, la = _entry(m, p, +1.0)
    b, lb = _entry(m, q, -1.0, skip_family=la.family)
    # step onto the line: radial plus along-axis, which is causal close to the line
    pa = a.copy()
    r = la.distance(a[None])[0]
    pa[_others(la.family)] = la.fixed
    pa[la.family] += r * 1.0 + 1e-12
    qb = b.copy()
    r = lb.distance(b[None])[0]
    qb[_others(lb.family)] = lb.fixed
    qb[lb.family] -= r * 1.0 + 1e-12
    # align along-line coordinates so the chain endpoints differ by at least 1/2
    mid = None
    h = qb - pa
    for shift_a in np.arange(0.0, 2.0, 0.5):
        for shift_b in np.arange(0.0, 2.0, 0.5):
            p1 = pa.copy()
            p1[la.family] += shift_a
            q1 = qb.copy()
            q1[lb.family] -= shift_b
            try:
                mid = standard_path(p1, q1, la.family, lb.family)
                break
            except NotConstructible:
                continue
        if mid is not None:
            break
    if mid is None:
        raise NotConstructible(f"no standard path between {pa} and {qb} (h = {h})")
    V = np.vstack([p, a, pa, mid.vertices, qb, b, q])
    keep = np.concatenate([[True], np.linalg.norm(np.diff(V, axis=0), axis=1) > 1e-13])
    path = CausalPath(V[keep])
    validate_path(m, CausalPath(densify(path.vertices, eps / 20)), 0.0)
    return path


# ---------------------------------------------------------------- experiments

def heteroclinic_experiment(m, l, l2, ladder=(4, 8, 16), spacing=0.0025, radius=None,
                            delta=None, out_csv=None):
    """Maximizers between x - n e_i on l and x' + n e_j on l' for a ladder of n.

    Returns per-n head/tail confinement lengths: arclength spent inside
    B_delta of l at the start and of l' at the end.
    """
    eps = m.params[3]
    delta = delta or eps_prime(m, l.family)
    i, j = l.family, l2.family
    rows = []
    if i != j:
        k = 3 - i - j
        if l2.coord(k) < l.coord(k):
            raise NotConstructible("l' is not in the causal future side of l")
        x = l.point(l2.coord(i))
        x2 = l2.point(l.coord(j))
        ei, ej = np.eye(3)[i], np.eye(3)[j]
        ends = [(x - n * ei, x2 + n * ej) for n in ladder]
    else:
        a, b = _others(i)
        if not (l2.coord(a) > l.coord(a) and l2.coord(b) > l.coord(b)):
            raise NotConstructible("same-family lines need both transverse coordinates to increase")
        ei = np.eye(3)[i]
        x = l.point(0.0)
        kvec = l2.point(0.0) - x
        ends = [(x - n * ei, x + kvec + n * ei) for n in ladder]
    for n, (p, q) in zip(ladder, ends):
        g = guide_path(p, q)
        d, path, _ = tube_maximizer(m, p, q, spacing, radius, g)
        V = densify(path.vertices, delta / 4)
        s = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(V, axis=0), axis=1))])
        inside_l = l.distance(V) <= delta
        inside_l2 = l2.distance(V) <= delta
        head = s[np.argmin(inside_l)] if not inside_l.all() else s[-1]
        tail = s[-1] - s[len(V) - 1 - np.argmin(inside_l2[::-1])] if not inside_l2.all() else s[-1]
        rows.append({"n": int(n), "d": d, "head": float(head), "tail": float(tail),
                     "changes": count_tube_changes(path, eps).changes, "path": path})
    if out_csv:
        with open(out_csv, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["n", "d", "head_confined", "tail_confined", "tube_changes"])
            for r in rows:
                w.writerow([r["n"], repr(r["d"]), repr(r["head"]), repr(r["tail"]), r["changes"]])
    grows = all(b["head"] > a["head"] and b["tail"] > a["tail"] for a, b in zip(rows[:-1], rows[1:]))
    return {"rows": rows, "delta": delta, "confinement_grows": grows}


def segment_report(m, path, spacing, reference=None):
    """All per-segment combinatorial checks for one maximal segment."""
    eps = m.params[3]
    part = count_tube_changes(path, eps)
    L31 = check_L31(m, path, part)
    fams_p = LineSystem().families_of(path.start)
    fams_q = LineSystem().families_of(path.end)
    distinct = bool(fams_p and fams_q and set(fams_p) != set(fams_q))
    shadow = None
    if distinct:
        try:
            shadow = shadowing_check(path, eps, reference)
        except NotConstructible:
            shadow = None
    return {"F30": check_F30(path, eps), "L31": L31, "changes": part.changes,
            "shadowing": shadow, "shadow_limit": 4 * eps + 2 * spacing,
            "start": path.start.tolist(), "end": path.end.tolist()}


BATTERY_ENDS = [
    ((0.0, 0.0, 0.0), (3.0, 2.0, 2.5)),
    ((0.0, 0.0, 0.0), (2.0, 1.5, 0.5)),
    ((0.0, 0.0, 0.5), (2.5, 3.5, 2.5)),
    ((0.5, 0.5, 0.0), (3.5, 2.0, 3.0)),
    ((0.0, 0.0, 0.0), (1.5, 2.5, 3.0)),
    ((0.0, 0.0, 0.5), (2.0, 3.0, 2.0)),
]


def segment_battery(m, spacing=0.0025, ends=None, per_path=3, min_len=1.0, pool=None):
    """Maximal segments: DP maximizers between line points and their pieces between on-line vertices.

    Pieces of a maximizer are maximal, so each DP path also contributes up to
    `per_path` sub-segments whose endpoints lie on lines of distinct families.
    """
    ends = BATTERY_ENDS if ends is None else ends

    def one(pq):
        p, q = np.asarray(pq[0], float), np.asarray(pq[1], float)
        ref = standard_path(p, q)
        d, path, _ = tube_maximizer(m, p, q, spacing, None, ref)
        out = [(path, ref)]
        cuts = on_line_cuts(path)
        s = path.param
        picks = []
        for a in range(len(cuts)):
            for b in range(len(cuts) - 1, a, -1):
                (i, fi), (j, fj) = cuts[a], cuts[b]
                if s[j] - s[i] >= min_len and set(fi) != set(fj) and (i, j) != (0, len(path) - 1):
                    picks.append((i, j))
                    break
        step = max(1, len(picks) // per_path)
        for i, j in picks[::step][:per_path]:
            sub = path.sub(i, j)
            try:
                r = standard_path(sub.start, sub.end)
            except NotConstructible:
                r = None
            out.append((sub, r))
        return out

    runs = list(pool.map(one, ends)) if pool is not None else [one(e) for e in ends]
    reports = []
    for run in runs:
        for path, ref in run:
            rep = segment_report(m, path, spacing, ref)
            rep["vertices"] = len(path)
            reports.append(rep)
    return reports


def write_segment_csv(m, path, fname, report=None):
    """Vertices with tube labels, followed by summary rows."""
    eps = m.params[3]
    labels = LineSystem(eps).component_labels(path.vertices)
    with open(fname, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x1", "x2", "x3", "tube_family", "tube_c1", "tube_c2"])
        for v, lab in zip(path.vertices, labels):
            lab = lab or (-1, "", "")
            w.writerow([repr(float(c)) for c in v] + [lab[0] + 1 if lab[0] >= 0 else 0, lab[1], lab[2]])
        if report:
            w.writerow([])
            w.writerow(["changes", report["changes"]])
            w.writerow(["F30_margin", repr(report["F30"])])
            w.writerow(["L31_slack_literal", repr(report["L31"]["slack_literal"])])
            w.writerow(["L31_slack_corrected", repr(report["L31"]["slack_corrected"])])
            w.writerow(["shadowing", repr(report["shadowing"])])
    return fname
