"""Command line front end: `lorentzlab run <task> [options]`.

A run reads an optional JSON config, applies command line overrides, executes
one task and writes report.json plus task CSVs and gnuplot .dat files into the
output directory. Exit codes: 0 all checks passed, 2 some check failed,
1 usage or configuration error.
"""
import argparse
import csv
import json
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import _kernels as K
from .errors import ConfigError, LorentzError, MissingReport

TASKS = ("metric-check", "geodesic", "distance", "stable-sep", "measures", "calibrate", "hedlund",
         "graph-theorem")
FAMILIES = ("flat2", "flat3", "conformal2", "boundary2", "hedlund")
HEDLUND_SUBTASKS = ("shadowing", "stable", "combinatorics", "heteroclinic", "cone")

# file name -> header; {i} expands over the coordinates
CSV_SCHEMAS = {
    "path.csv": ["t", "x{i}", "is_in_tube", "local_sqrt_g"],
    "trajectory.csv": ["s", "x{i}", "v{i}"],
    "stable_table.csv": ["h{i}", "ell", "err", "N", "flag"],
    "measure.csv": ["cell", "x{i}", "v{i}", "weight"],
    "shadowing.csv": ["s", "m1", "m2", "m3", "r1", "r2", "r3", "dist"],
    "segments.csv": ["segment", "changes", "F30_margin", "L31_slack_literal", "L31_slack_corrected",
                     "shadowing", "shadow_limit"],
    "heteroclinic.csv": ["n", "d", "head_confined", "tail_confined", "tube_changes"],
    "cone.csv": ["h{i}"],
    "gains.csv": ["dist_base", "dist_tangent", "gain"],
}

DEFAULTS = {
    "metric": "flat2", "lambdas": [0.5, 0.3, 0.2], "eps": 0.01, "amp": 0.3, "c0": 1.0,
    "from": None, "to": None, "v": None, "h": None, "dx": None, "stencil_k": None,
    "step": 1e-3, "span": 10.0, "N": None, "samples": None, "seed": 0, "subtask": "shadowing",
    "out": "out", "formats": ["csv", "json"], "radius": None, "trials": None,
}
POSITIVE = ("eps", "c0", "dx", "step", "span", "radius")


def expand(header, n):
    out = []
    for h in header:
        if "{i}" in h:
            out.extend(h.format(i=i + 1) for i in range(n))
        else:
            out.append(h)
    return out


def schema_help():
    lines = ["CSV schemas ({i} runs over coordinates):"]
    for name, cols in CSV_SCHEMAS.items():
        lines.append(f"  {name}: " + ",".join(cols))
    lines.append("measure files are named measure_<k>.csv with the measure.csv schema.")
    return "\n".join(lines)


def write_csv(fname, schema, n, rows):
    with open(fname, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(expand(CSV_SCHEMAS[schema], n))
        for r in rows:
            w.writerow([x if isinstance(x, str) else repr(float(x)) if not isinstance(x, (int, np.integer))
                        else int(x) for x in r])
    return fname


def write_dat(fname, rows, comment):
    with open(fname, "w") as fh:
        fh.write(f"# {comment}\n")
        for r in rows:
            fh.write(" ".join(repr(float(x)) for x in r) + "\n")
    return fname


# ---------------------------------------------------------------- config

def _vector(key, value, n=None):
    if value is None:
        return None
    try:
        if isinstance(value, str):
            value = [float(x) for x in value.split(",") if x.strip()]
        v = np.asarray(value, float).ravel()
    except (TypeError, ValueError):
        raise ConfigError(key, f"cannot parse {value!r} as a vector")
    if n is not None and len(v) != n:
        raise ConfigError(key, f"expected {n} components, got {len(v)}")
    if not np.all(np.isfinite(v)):
        raise ConfigError(key, "components must be finite")
    return v


def load_config(path, overrides):
    cfg = dict(DEFAULTS)
    if path:
        try:
            with open(path) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError("config", str(e))
        for k, v in data.items():
            if k not in DEFAULTS:
                raise ConfigError(k, "unknown key")
            cfg[k] = v
    for k, v in overrides.items():
        if v is not None:
            cfg[k] = v
    return validate(cfg)


def validate(cfg):
    if cfg["metric"] not in FAMILIES:
        raise ConfigError("metric", f"must be one of {', '.join(FAMILIES)}")
    for k in POSITIVE:
        if cfg[k] is not None:
            try:
                cfg[k] = float(cfg[k])
            except (TypeError, ValueError):
                raise ConfigError(k, "must be a number")
            if not cfg[k] > 0:
                raise ConfigError(k, "must be positive")
    lam = _vector("lambdas", cfg["lambdas"], 3)
    if np.any(lam <= 0):
        raise ConfigError("lambdas", "must be positive")
    cfg["lambdas"] = lam.tolist()
    for k in ("stencil_k", "samples", "trials", "seed"):
        if cfg[k] is not None:
            try:
                cfg[k] = int(cfg[k])
            except (TypeError, ValueError):
                raise ConfigError(k, "must be an integer")
            if cfg[k] < (0 if k == "seed" else 1):
                raise ConfigError(k, "out of range")
    if cfg["N"] is not None:
        N = cfg["N"]
        N = [int(x) for x in (N.split(",") if isinstance(N, str) else np.atleast_1d(N))]
        if not N or min(N) < 1:
            raise ConfigError("N", "must be positive integers")
        cfg["N"] = N
    if not isinstance(cfg["amp"], (int, float)) or not 0 <= cfg["amp"] < cfg["c0"]:
        raise ConfigError("amp", "must satisfy 0 <= amp < c0")
    return cfg


def threads():
    raw = os.environ.get("LORENTZ_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError("LORENTZ_THREADS", f"not an integer: {raw!r}")
    if n < 1:
        raise ConfigError("LORENTZ_THREADS", "must be at least 1")
    return n


def make_metric(cfg):
    from .spacetime import (HedlundParams, TrigPoly, make_boundary_2torus, make_conformally_flat,
                            make_flat, make_hedlund)
    fam = cfg["metric"]
    if fam == "flat2":
        return make_flat(2)
    if fam == "flat3":
        return make_flat(3)
    if fam == "conformal2":
        return make_conformally_flat(2, TrigPoly.sine(2, 1, cfg["amp"], cfg["c0"]))
    if fam == "boundary2":
        return make_boundary_2torus()
    return make_hedlund(HedlundParams(tuple(cfg["lambdas"]), cfg["eps"]))


# ---------------------------------------------------------------- tasks

def task_metric_check(m, cfg, out, pool):
    from .spacetime import signature_ok, verify_hedlund
    rng = np.random.default_rng(cfg["seed"])
    P = rng.uniform(0, 1, (cfg["samples"] or 4096, m.dim))
    G, _ = m.forms(P)
    rep = {"signature_samples": len(P), "signature_ok": bool(np.all(signature_ok(G)))}
    checks = {"signature": rep["signature_ok"]}
    if m.kind == K.HEDLUND:
        v = verify_hedlund(m, m.meta["params"], cfg["samples"] or 20000, cfg["seed"])
        rep["conditions"] = v
        checks["conditions"] = bool(v["pass"])
    return rep, checks


def task_geodesic(m, cfg, out, pool):
    from .flow import integrate_pregeodesic, oracle_distance, speed_drift
    x0 = _vector("from", cfg["from"], m.dim) if cfg["from"] is not None else np.zeros(m.dim)
    v = _vector("v", cfg["v"], m.dim) if cfg["v"] is not None else np.eye(m.dim)[0]
    v = v / np.linalg.norm(v)
    method = "rkf45" if m.kind == K.HEDLUND else "rk4"
    path = integrate_pregeodesic(m, (x0, v), cfg["span"], cfg["step"], method=method, record=10)
    drift = speed_drift(path)
    rep = {"method": method, "span": cfg["span"], "step": cfg["step"], "drift": drift,
           "end": path.end.tolist()}
    checks = {"drift": drift < 1e-8}
    if m.kind == K.CONFORMAL:
        od = oracle_distance(m, (x0, v), min(cfg["span"], 5.0), cfg["step"])
        rep["oracle_distance"] = od
        checks["oracle"] = od < 1e-6
    rows = [[s, *x, *t] for s, x, t in zip(path.param, path.vertices, path.tangents)]
    write_csv(os.path.join(out, "trajectory.csv"), "trajectory.csv", m.dim, rows)
    rep["files"] = ["trajectory.csv"]
    return rep, checks


def _exact_flat(p, q):
    v = np.asarray(q) - np.asarray(p)
    s = v[0] ** 2 - np.sum(v[1:] ** 2)
    return math.sqrt(s) if s >= 0 and v[0] > 0 else 0.0


def task_distance(m, cfg, out, pool):
    from .reach import time_separation, write_path_csv
    p = _vector("from", cfg["from"] if cfg["from"] is not None else [0] * m.dim, m.dim)
    q = _vector("to", cfg["to"], m.dim) if cfg["to"] is not None else p + np.eye(m.dim)[0] * 2
    dx = cfg["dx"] or 0.02
    d, path = time_separation(m, p, q, dx, cfg["stencil_k"], "diamond")
    rep = {"from": p.tolist(), "to": q.tolist(), "dx": dx, "d_hat": d, "vertices": len(path),
           "files": ["path.csv"]}
    checks = {"reachable_or_zero": d >= 0}
    if m.name.startswith("flat"):
        ex = _exact_flat(p, q)
        rep["exact"] = ex
        checks["bracket"] = bool(0.99 * ex - 1e-12 <= d <= ex + 1e-12)
    write_path_csv(m, path, os.path.join(out, "path.csv"))
    return rep, checks


def task_stable_sep(m, cfg, out, pool):
    from .stable import check_T17_properties, dual_stable, field_table, stable_table
    n = m.dim
    checks = {}
    if m.kind == K.HEDLUND:
        lam = m.meta["params"].lam
        H = np.atleast_2d(_vector("h", cfg["h"])) if cfg["h"] is not None else \
            np.vstack([np.eye(3), np.ones(3)])
        Ns = cfg["N"] or [10, 20]
        tab = stable_table(m, H, Ns, cfg["dx"] or 0.0025, pool=pool,
                           radius=cfg["radius"] or 8 * cfg["eps"])
        # tables store unit directions; values refer to the given h
        exact = H @ lam
        Nmax = Ns[-1]
        lower = Nmax * exact - tab.values * Nmax
        rep = {"h": H.tolist(), "ell_hat": tab.values.tolist(), "exact": exact.tolist(),
               "err": tab.errs.tolist(), "N": Nmax, "deficit": lower.tolist()}
        checks["upper"] = bool(np.all(tab.values <= exact * (1 + 1e-12)))
        checks["lower"] = bool(np.all(lower <= 1 / cfg["eps"] + 1.5 + 2))
        tab.directions = H / np.linalg.norm(H, axis=1, keepdims=True)
        tab.values = tab.values / np.linalg.norm(H, axis=1)
    else:
        ang = np.linspace(-0.75, 0.75, 31)
        if m.name == "boundary2":
            ang = np.linspace(0.05, 1.52, 31)
            U = np.column_stack([np.cos(ang), np.sin(ang)])
        else:
            U = np.column_stack([np.ones_like(ang), ang])
        tab = field_table(m, U, R=10.0, spacing=cfg["dx"] or 0.02, stencil_k=cfg["stencil_k"])
        prop = check_T17_properties(tab, pairs=cfg["samples"] or 1000, seed=cfg["seed"])
        rep = {"properties": prop}
        checks["superadditivity"] = prop["superadditivity_violations"] == 0
        checks["concavity"] = prop["concavity_violations"] == 0
        if m.name.startswith("flat"):
            ex = np.sqrt(np.maximum(tab.directions[:, 0] ** 2 - tab.directions[:, 1] ** 2, 0))
            ok = np.array([f == "in" for f in tab.flags])
            rep["oracle_max_error"] = float(np.max(np.abs(tab.values - ex)[ok]))
            checks["oracle"] = bool(np.all(np.abs(tab.values - ex)[ok] <= tab.errs[ok]))
            rep["dual_e0"] = dual_stable(tab, [1.0, 0.0])
        tab.meta = {}
    tab.write_csv(os.path.join(out, "stable_table.csv"))
    rep["files"] = ["stable_table.csv"]
    return rep, checks


def task_measures(m, cfg, out, pool):
    from .measures import find_maximal_measure, rotation_class
    if m.kind == K.HEDLUND:
        H = np.atleast_2d(_vector("h", cfg["h"])) if cfg["h"] is not None else np.eye(3)
        N = (cfg["N"] or [20])[-1]
    else:
        H = np.atleast_2d(_vector("h", cfg["h"])) if cfg["h"] is not None else np.array([[2.0, 1.0]])
        N = (cfg["N"] or [5])[-1]

    def one(h):
        return find_maximal_measure(m, h, N, cfg["dx"])

    results = list(pool.map(one, H)) if pool is not None else [one(h) for h in H]
    rep = {"measures": [], "files": []}
    checks = {}
    tol = 2 * (cfg["dx"] or (0.0025 if m.kind == K.HEDLUND else 0.02))
    for k, (h, (mu, L, r)) in enumerate(zip(H, results)):
        name = f"measure_{k}.csv"
        mu.write_csv(os.path.join(out, name))
        rep["files"].append(name)
        r = {k2: v for k2, v in r.items()}
        r["h"] = h.tolist()
        rep["measures"].append(r)
        checks[f"rotation_{k}"] = bool(np.allclose(rotation_class(mu), h, atol=1e-9))
        checks[f"gap_{k}"] = bool(r["gap"] >= -tol)
        if m.kind == K.HEDLUND:
            checks[f"length_{k}"] = bool(abs(L - h @ m.meta["params"].lam) <= tol)
    if len(results) > 1:
        sup = [r[0].support() for r in results]
        disjoint = all(not (a & b) for i, a in enumerate(sup) for b in sup[i + 1:])
        rep["disjoint_supports"] = disjoint
        checks["disjoint"] = disjoint
    return rep, checks


def task_calibrate(m, cfg, out, pool):
    from .calibrate import Calibration, duality_check, hedlund_lstar, is_pseudo_time, l_infty
    if m.kind == K.HEDLUND:
        lam = m.meta["params"].lam
        alpha = _vector("h", cfg["h"], 3) if cfg["h"] is not None else lam
        lstar = hedlund_lstar(lam, alpha)
    elif m.name.startswith("flat"):
        alpha = _vector("h", cfg["h"], m.dim) if cfg["h"] is not None else np.eye(m.dim)[0]
        # dual of the Minkowski norm on the future cone
        a0, ar = alpha[0], np.linalg.norm(alpha[1:])
        lstar = math.sqrt(a0 ** 2 - ar ** 2) if a0 > ar else 0.0
    else:
        raise ConfigError("metric", "calibrate supports hedlund and flat metrics")
    cal = Calibration(alpha, lstar=lstar)
    pt = is_pseudo_time(m, cal, 1.0, cfg["samples"] or 1000, seed=cfg["seed"])
    li = l_infty(m, alpha)
    du = duality_check(m, alpha, lstar, trials=cfg["trials"] or 100, seed=cfg["seed"], pool=pool)
    rep = {"calibration": cal.as_dict(), "pseudo_time": pt, "l_infty": li if math.isfinite(li) else "-inf",
           "duality": du, "files": ["calibration.json"]}
    with open(os.path.join(out, "calibration.json"), "w") as fh:
        json.dump({"alpha": alpha.tolist(), "lstar": lstar, "worst_margin": pt["worst_margin"],
                   "eps_hat": pt["eps_hat"], "l_infty": rep["l_infty"]}, fh, indent=2, sort_keys=True)
    return rep, {"pseudo_time": pt["pass"], "one_sided_duality": du["pass"]}


def _hedlund_only(m):
    if m.kind != 2:
        raise ConfigError("metric", "the hedlund task needs metric=hedlund")


def task_hedlund(m, cfg, out, pool):
    from . import hedlund as H
    _hedlund_only(m)
    sub = cfg["subtask"]
    eps = m.params[3]
    dx = cfg["dx"] or 0.0025
    if sub == "shadowing":
        p = _vector("from", cfg["from"], 3) if cfg["from"] is not None else np.zeros(3)
        q = _vector("to", cfg["to"], 3) if cfg["to"] is not None else np.array([3.0, 2.0, 2.5])
        ref = H.standard_path(p, q)
        d, path, _ = H.tube_maximizer(m, p, q, dx, cfg["radius"], ref)
        seg = H.segment_report(m, path, dx, ref)
        V = H.densify(path.vertices, 0.01)
        R = H.densify(ref.vertices, 0.001)
        from scipy.spatial import cKDTree
        dist, idx = cKDTree(R).query(V)
        s = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(V, axis=0), axis=1))])
        write_csv(os.path.join(out, "shadowing.csv"), "shadowing.csv", 3,
                  [[si, *v, *R[j], di] for si, v, j, di in zip(s, V, idx, dist)])
        part = H.count_tube_changes(path, eps)
        rep = {"d_hat": d, "segment": _plain(seg), "timeline": _timeline(path, part),
               "files": ["shadowing.csv"]}
        checks = {"shadowing": seg["shadowing"] is not None and seg["shadowing"] <= seg["shadow_limit"],
                  "F30": seg["F30"] >= 0, "changes": seg["changes"] <= 6}
        return rep, checks
    if sub == "stable":
        return task_stable_sep(m, cfg, out, pool)
    if sub == "combinatorics":
        from .hedlund import segment_battery
        segs = segment_battery(m, dx, pool=pool)
        rows = [[i, s["changes"], s["F30"], s["L31"]["slack_literal"], s["L31"]["slack_corrected"],
                 s["shadowing"] if s["shadowing"] is not None else math.nan, s["shadow_limit"]]
                for i, s in enumerate(segs)]
        write_csv(os.path.join(out, "segments.csv"), "segments.csv", 3, rows)
        checks = {"count": len(segs) >= 20,
                  "F30": all(s["F30"] >= 0 for s in segs),
                  "L31": all(s["L31"]["slack_literal"] >= 0 for s in segs),
                  "changes": all(s["changes"] <= 6 for s in segs),
                  "shadowing": all(s["shadowing"] is None or s["shadowing"] <= s["shadow_limit"] for s in segs)}
        return {"segments": [_plain(s) for s in segs], "files": ["segments.csv"]}, checks
    if sub == "heteroclinic":
        l1, l2 = H.Line(0, (0.0, 0.0)), H.Line(1, (1.0, 0.5))
        res = H.heteroclinic_experiment(m, l1, l2, tuple(cfg["N"] or (2, 4, 8)), dx,
                                        out_csv=os.path.join(out, "heteroclinic.csv"))
        rows = [{k: v for k, v in r.items() if k != "path"} for r in res["rows"]]
        return ({"rows": rows, "delta": res["delta"], "files": ["heteroclinic.csv"]},
                {"confinement_grows": res["confinement_grows"]})
    if sub == "cone":
        from .stable import estimate_cone
        c = estimate_cone(m, R=20.0, pool=pool)
        write_csv(os.path.join(out, "cone.csv"), "cone.csv", 3, c.directions)
        hd = c.hausdorff_to(np.eye(3))
        return ({"hausdorff": hd, "zero_in_hull": c.zero_in_hull, "meta": c.meta, "files": ["cone.csv"]},
                {"hausdorff": hd <= 0.05, "zero_not_in_hull": not c.zero_in_hull})
    raise ConfigError("subtask", f"must be one of {', '.join(HEDLUND_SUBTASKS)}")


def _timeline(path, part):
    """Arclength positions where the tube label changes."""
    rows = []
    for a, b, c in part.intervals:
        rows += [[float(a), c[0] + 1], [float(b), c[0] + 1]]
    return rows


def task_graph_theorem(m, cfg, out, pool):
    from .graphcheck import crossing_battery, lemma20a_check, minkowski_ladder, write_gain_csv
    lad = minkowski_ladder()
    bat = crossing_battery(None, cfg["samples"] or 1000, seed=cfg["seed"], pool=pool)
    l20a = lemma20a_check(m, cfg["trials"] or 100000, seed=cfg["seed"])
    write_gain_csv(bat["rows"], os.path.join(out, "gains.csv"))
    rep = {"ladder": lad, "crossing": {k: v for k, v in bat.items() if k != "rows"}, "lemma20a": l20a,
           "files": ["gains.csv"]}
    checks = {"holder_exponent": abs(lad["exponent"] - 0.5) <= 0.05,
              "lipschitz_growth": lad["lipschitz_growth"] >= 10,
              "gain_positive": bat["positive"] and bat["eta_hat"] > 0,
              "lemma20a": l20a["holds"]}
    return rep, checks


RUNNERS = {"metric-check": task_metric_check, "geodesic": task_geodesic, "distance": task_distance,
           "stable-sep": task_stable_sep, "measures": task_measures, "calibrate": task_calibrate,
           "hedlund": task_hedlund, "graph-theorem": task_graph_theorem}


def _plain(x):
    """JSON-ready copy: arrays to lists, non-finite floats to strings."""
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, np.ndarray):
        return _plain(x.tolist())
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else ("inf" if x > 0 else "-inf" if x < 0 else "nan")
    if hasattr(x, "__dict__") and not isinstance(x, type):
        return repr(x)
    return x


# ---------------------------------------------------------------- plots

def emit_plots(out):
    """gnuplot data files derived from report.json and the CSVs it lists."""
    rp = os.path.join(out, "report.json")
    if not os.path.exists(rp):
        raise MissingReport(f"no report.json in {out}")
    with open(rp) as fh:
        rep = json.load(fh)
    task = rep["task"]
    res = rep["results"]
    made = []

    def read(name):
        with open(os.path.join(out, name)) as fh:
            r = csv.reader(fh)
            head = next(r)
            return head, [row for row in r if row]

    if task == "distance":
        head, rows = read("path.csv")
        n = len(head) - 3
        made.append(write_dat(os.path.join(out, "path.dat"), [[float(x) for x in r[:n + 1]] for r in rows],
                              "t " + " ".join(head[1:n + 1])))
    if task == "geodesic":
        head, rows = read("trajectory.csv")
        n = (len(head) - 1) // 2
        made.append(write_dat(os.path.join(out, "trajectory.dat"),
                              [[float(x) for x in r[:n + 1]] for r in rows], "s " + " ".join(head[1:n + 1])))
    if "stable_table.csv" in res.get("files", []):
        head, rows = read("stable_table.csv")
        n = len(head) - 4
        fan = []
        for r in rows:
            h = np.array([float(x) for x in r[:n]])
            ang = [math.atan2(h[1], h[0])] if n == 2 else [math.acos(np.clip(h[2], -1, 1)),
                                                           math.atan2(h[1], h[0])]
            fan.append([*ang, float(r[n]), float(r[n + 1])])
        made.append(write_dat(os.path.join(out, "lhat_fan.dat"), fan,
                              "angle(s) ell_hat err" if n == 3 else "angle ell_hat err"))
    if task == "graph-theorem":
        _, rows = read("gains.csv")
        pts = [[math.log(float(a)), math.log(float(b))] for a, b, _ in rows if float(a) > 0]
        lad = res["ladder"]["rows"]
        pts += [[math.log(r["dist_base"]), math.log(r["dist_tangent"])] for r in lad]
        made.append(write_dat(os.path.join(out, "holder_scatter.dat"), pts, "log_dist_base log_dist_tangent"))
    if task == "hedlund" and res.get("timeline"):
        made.append(write_dat(os.path.join(out, "tube_timeline.dat"), res["timeline"], "s tube_family"))
    return [os.path.basename(f) for f in made]


# ---------------------------------------------------------------- entry points

def run(task, cfg):
    """Execute one task; returns (exit code, report)."""
    out = cfg["out"]
    os.makedirs(out, exist_ok=True)
    n = threads()
    m = make_metric(cfg)
    t0 = time.perf_counter()
    if n > 1:
        with ThreadPoolExecutor(max_workers=n) as pool:
            res, checks = RUNNERS[task](m, cfg, out, pool)
    else:
        res, checks = RUNNERS[task](m, cfg, out, None)
    elapsed = time.perf_counter() - t0
    checks = {k: bool(v) for k, v in checks.items()}
    report = {"task": task, "config": _plain({k: v for k, v in cfg.items() if k != "out"}),
              "results": _plain(res), "checks": checks, "passed": all(checks.values())}
    with open(os.path.join(out, "report.json"), "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
    report["plots"] = emit_plots(out)
    with open(os.path.join(out, "timing.json"), "w") as fh:
        json.dump({"task": task, "seconds": elapsed, "threads": n}, fh, indent=2)
    return (0 if report["passed"] else 2), report


def build_parser():
    p = argparse.ArgumentParser(prog="lorentzlab", description=__doc__,
                                formatter_class=argparse.RawDescriptionHelpFormatter, epilog=schema_help())
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run one task", formatter_class=argparse.RawDescriptionHelpFormatter,
                       epilog=schema_help())
    r.add_argument("task", choices=TASKS)
    r.add_argument("--config", help="JSON file with any of the option keys below")
    r.add_argument("--metric", choices=FAMILIES)
    r.add_argument("--lambdas", help="three positive weights, comma separated (hedlund)")
    r.add_argument("--eps", type=float, help="tube radius (hedlund)")
    r.add_argument("--amp", type=float, help="amplitude of the conformal factor (conformal2)")
    r.add_argument("--from", dest="from_", help="start point, comma separated")
    r.add_argument("--to", help="end point, comma separated")
    r.add_argument("--v", help="initial direction (geodesic)")
    r.add_argument("--h", help="homology direction or covector, rows separated by ';'")
    r.add_argument("--dx", type=float, help="grid spacing")
    r.add_argument("--stencil-k", type=int)
    r.add_argument("--step", type=float, help="integrator step")
    r.add_argument("--span", type=float, help="integration length")
    r.add_argument("--N", help="multiples, comma separated")
    r.add_argument("--samples", type=int)
    r.add_argument("--trials", type=int)
    r.add_argument("--seed", type=int)
    r.add_argument("--task", dest="subtask", help="hedlund subtask: " + ", ".join(HEDLUND_SUBTASKS))
    r.add_argument("--out", help="output directory")
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return 1 if e.code not in (0, None) else 0
    ov = {"metric": args.metric, "lambdas": args.lambdas, "eps": args.eps, "amp": args.amp,
          "from": args.from_, "to": args.to, "v": args.v, "dx": args.dx, "stencil_k": args.stencil_k,
          "step": args.step, "span": args.span, "N": args.N, "samples": args.samples,
          "trials": args.trials, "seed": args.seed, "subtask": args.subtask, "out": args.out}
    try:
        if args.h is not None:
            ov["h"] = [_vector("h", row).tolist() for row in args.h.split(";")] if ";" in args.h else args.h
        cfg = load_config(args.config, ov)
        code, rep = run(args.task, cfg)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 1
    except LorentzError as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return 2
    for k, v in rep["checks"].items():
        print(f"{'PASS' if v else 'FAIL'} {k}")
    print(f"report: {os.path.join(cfg['out'], 'report.json')}")
    return code


if __name__ == "__main__":
    sys.exit(main())
