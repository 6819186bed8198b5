"""Occupation measures of curves on the unit tangent bundle of the torus.

A measure is a sparse histogram over (position cell, direction bin). Each cell
keeps its mass together with the mass-weighted sums of positions and unit
tangents, so cell representatives follow the curve rather than the cell centre.
"""
import csv
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import _kernels as K
from .errors import EmptyPath, NonCausalCell
from .spacetime import VALIDATION_MARGIN, CausalPath

POS_CELLS = 64
ANGLE_BINS = 256


@lru_cache(maxsize=None)
def icosphere_centres(levels=2):
    """Unit centroids of the faces of a subdivided icosahedron (20 * 4**levels faces)."""
    t = (1 + 5 ** 0.5) / 2
    V = [(-1, t, 0), (1, t, 0), (-1, -t, 0), (1, -t, 0), (0, -1, t), (0, 1, t),
         (0, -1, -t), (0, 1, -t), (t, 0, -1), (t, 0, 1), (-t, 0, -1), (-t, 0, 1)]
    V = [np.array(v, float) / np.linalg.norm(v) for v in V]
    F = [(0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11), (1, 5, 9), (5, 11, 4),
         (11, 10, 2), (10, 7, 6), (7, 1, 8), (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8),
         (3, 8, 9), (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1)]
    tris = [tuple(V[i] for i in f) for f in F]
    for _ in range(levels):
        nxt = []
        for a, b, c in tris:
            ab, bc, ca = [(u + v) / np.linalg.norm(u + v) for u, v in ((a, b), (b, c), (c, a))]
            nxt += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        tris = nxt
    C = np.array([a + b + c for a, b, c in tris])
    return C / np.linalg.norm(C, axis=1, keepdims=True)


def direction_bins(n):
    if n == 2:
        return ANGLE_BINS
    if n == 3:
        return len(icosphere_centres())
    raise ValueError("direction bins exist for n = 2 and n = 3")


def direction_bin(V):
    V = np.atleast_2d(V)
    if V.shape[1] == 2:
        ang = np.arctan2(V[:, 1], V[:, 0]) % (2 * np.pi)
        return np.minimum((ang / (2 * np.pi) * ANGLE_BINS).astype(np.int64), ANGLE_BINS - 1)
    return np.argmax(V @ icosphere_centres().T, axis=1).astype(np.int64)


@dataclass
class OccupationMeasure:
    dim: int
    keys: np.ndarray        # position cell * direction bins + direction bin, sorted
    weights: np.ndarray
    pos_sum: np.ndarray     # weighted positions (mod 1)
    dir_sum: np.ndarray     # weighted unit tangents
    window: float = 0.0
    cells: int = POS_CELLS

    @classmethod
    def _aggregate(cls, dim, keys, w, P, V, window, cells):
        order = np.argsort(keys, kind="stable")
        keys, w, P, V = keys[order], w[order], P[order], V[order]
        uk, start = np.unique(keys, return_index=True)
        W = np.add.reduceat(w, start)
        PS = np.add.reduceat(P * w[:, None], start, axis=0)
        VS = np.add.reduceat(V * w[:, None], start, axis=0)
        return cls(dim, uk, W, PS, VS, window, cells)

    @property
    def mass(self):
        return float(self.weights.sum())

    @property
    def positions(self):
        return self.pos_sum / self.weights[:, None]

    @property
    def directions(self):
        D = self.dir_sum
        return D / np.linalg.norm(D, axis=1, keepdims=True)

    def scaled(self, c):
        return OccupationMeasure(self.dim, self.keys.copy(), self.weights * c, self.pos_sum * c,
                                 self.dir_sum * c, self.window, self.cells)

    def normalized(self):
        return self.scaled(1.0 / self.mass)

    def __add__(self, other):
        if other.dim != self.dim or other.cells != self.cells:
            raise ValueError("measures live on different cellizations")
        keys = np.concatenate([self.keys, other.keys])
        # sums are merged directly, so aggregate with unit weights on the sums
        order = np.argsort(keys, kind="stable")
        keys = keys[order]
        W = np.concatenate([self.weights, other.weights])[order]
        PS = np.concatenate([self.pos_sum, other.pos_sum])[order]
        VS = np.concatenate([self.dir_sum, other.dir_sum])[order]
        uk, start = np.unique(keys, return_index=True)
        return OccupationMeasure(self.dim, uk, np.add.reduceat(W, start),
                                 np.add.reduceat(PS, start, axis=0), np.add.reduceat(VS, start, axis=0),
                                 max(self.window, other.window), self.cells)

    def support(self, tol=0.0):
        return set(self.keys[self.weights > tol].tolist())

    def position_cells(self):
        return self.keys // direction_bins(self.dim)

    def write_csv(self, fname):
        n = self.dim
        P, D = self.positions, self.directions
        with open(fname, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["cell"] + [f"x{i + 1}" for i in range(n)] + [f"v{i + 1}" for i in range(n)]
                       + ["weight"])
            for k, p, d, wt in zip(self.keys, P, D, self.weights):
                w.writerow([int(k)] + [repr(float(x)) for x in p] + [repr(float(x)) for x in d]
                           + [repr(float(wt))])
        return fname


def _pieces(path, max_piece):
    """Midpoints, unit tangents and lengths of a subdivision of a polyline."""
    V = path.vertices
    D = np.diff(V, axis=0)
    L = np.linalg.norm(D, axis=1)
    keep = L > 0
    D, L, A = D[keep], L[keep], V[:-1][keep]
    k = np.maximum(1, np.ceil(L / max_piece).astype(np.int64))
    seg = np.repeat(np.arange(len(L)), k)
    j = np.concatenate([np.arange(c) for c in k]) if len(k) else np.zeros(0, np.int64)
    frac = (j + 0.5) / k[seg]
    M = A[seg] + frac[:, None] * D[seg]
    T = D[seg] / L[seg][:, None]
    return M, T, (L / k)[seg]


def occupation_measure(path, cells=POS_CELLS, max_piece=None, normalize=True):
    """Push-forward of arclength on the path to (position mod Z^n, unit tangent) cells.

    Polylines are cut into pieces no longer than a quarter cell; each piece puts
    its length at its midpoint with its constant tangent.
    """
    if not isinstance(path, CausalPath):
        path = CausalPath(np.asarray(path, float))
    if len(path) < 2 or not path.L_R > 0:
        raise EmptyPath("path has no length")
    n = path.dim
    M, T, w = _pieces(path, max_piece or 0.25 / cells)
    P = np.mod(M, 1.0)
    pc = np.minimum((P * cells).astype(np.int64), cells - 1)
    flat = np.ravel_multi_index(pc.T, (cells,) * n)
    keys = flat * direction_bins(n) + direction_bin(T)
    mu = OccupationMeasure._aggregate(n, keys, w, P, T, float(path.L_R), cells)
    return mu.normalized() if normalize else mu


def occupation_from_samples(X, V, cells=POS_CELLS, weights=None):
    """Measure from sampled points and tangents of a curve (for example a flow trajectory)."""
    X, V = np.atleast_2d(X), np.atleast_2d(V)
    if len(X) == 0:
        raise EmptyPath("no samples")
    n = X.shape[1]
    w = np.ones(len(X)) if weights is None else np.asarray(weights, float)
    T = V / np.linalg.norm(V, axis=1, keepdims=True)
    P = np.mod(X, 1.0)
    pc = np.minimum((P * cells).astype(np.int64), cells - 1)
    keys = np.ravel_multi_index(pc.T, (cells,) * n) * direction_bins(n) + direction_bin(T)
    return OccupationMeasure._aggregate(n, keys, w, P, T, float(w.sum()), cells).normalized()


def trajectory_measure(path, cells=POS_CELLS):
    """Measure of a recorded flow trajectory: trapezoid weights in its arclength parameter."""
    s = path.param
    w = np.zeros(len(s))
    ds = np.diff(s)
    w[:-1] += ds / 2
    w[1:] += ds / 2
    T = path.tangents if path.tangents is not None else np.gradient(path.vertices, s, axis=0)
    mu = occupation_from_samples(path.vertices, T, cells, w)
    mu.window = float(s[-1] - s[0])
    return mu


def mixture(measures, weights):
    weights = np.asarray(weights, float)
    out = None
    for mu, c in zip(measures, weights):
        part = mu.normalized().scaled(c)
        out = part if out is None else out + part
    return out


def rotation_class(mu):
    """Integral of the unit tangent against the measure."""
    return mu.directions.T @ mu.weights


def average_length(m, mu, tol=VALIDATION_MARGIN):
    """Integral of sqrt(-g(v,v)) at the cell representatives."""
    P, D = mu.positions, mu.directions
    G, O = m.forms(P)
    q = np.einsum("ki,kij,kj->k", D, G, D)
    past = np.einsum("ki,kij,kj->k", D, G, O) >= 0
    bad = (q > tol) | (past & (q < -tol))
    if np.any(bad):
        i = int(np.flatnonzero(bad)[0])
        raise NonCausalCell(f"cell {int(mu.keys[i])} direction {D[i]} is not future causal (g = {q[i]:.3g})")
    return float(np.sqrt(np.maximum(-q, 0.0)) @ mu.weights)


def invariance_defect(mu, f, h=1e-6):
    """Integral of the directional derivative df(v) by central differences at the cells."""
    P, D = mu.positions, mu.directions
    df = (np.asarray(f(P + h * D)) - np.asarray(f(P - h * D))) / (2 * h)
    return float(df @ mu.weights)


def find_maximal_measure(m, h, N=20, spacing=None, *, base=None, ell=None, radius=None,
                         cells=POS_CELLS, stencil_k=None):
    """Occupation measure of a long maximizer from x to x + N h, with mass making rho = h.

    Returns (measure, average length, report) where the report holds the gap
    between the stable time separation estimate and the average length.
    """
    from .reach import time_separation
    from .stable import default_base
    h = np.asarray(h, float)
    x = default_base(m, h) if base is None else np.asarray(base, float)
    q = x + N * h
    if m.kind == K.HEDLUND:
        from .hedlund import guide_path
        spacing = spacing or 0.0025
        rad = radius or 8 * m.params[3]
        d, path = time_separation(m, x, q, spacing, 1, "tube", guide=guide_path(x, q).vertices,
                                  radius=rad)
    else:
        spacing = spacing or 0.02
        q = x + np.round(N * h / spacing) * spacing
        d, path = time_separation(m, x, q, spacing, stencil_k, "diamond")
    if not len(path):
        raise EmptyPath(f"no causal path from {x} to {q}")
    mu = occupation_measure(path, cells)
    mu = mu.scaled(path.L_R / N)
    L = average_length(m, mu)
    lhat = d / N if ell is None else float(ell)
    rep = {"N": N, "spacing": spacing, "d": d, "ell_hat": lhat, "average_length": L,
           "gap": lhat - L, "rotation": rotation_class(mu).tolist(), "mass": mu.mass,
           "path_length": float(path.L_R)}
    return mu, L, rep
