import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lorentzlab import _kernels as K
from lorentzlab.errors import EmptyStencil
from lorentzlab.reach import build_graph, make_stencil, refine_maximizer, run_dp, time_separation
from lorentzlab.spacetime import MetricField, lorentz_length, make_constant, validate_path


def test_stencil_is_primitive_and_future():
    S = make_stencil([1, 0], 1)
    assert sorted(map(tuple, S)) == [(1, -1), (1, 0), (1, 1)]
    S = make_stencil([1, 0, 0], 3)
    assert np.all(S[:, 0] > 0)
    assert all(math.gcd(*map(int, np.abs(s))) == 1 for s in S)


def test_minkowski_distance_is_exact_for_stencil_direction(flat2):
    d, path = time_separation(flat2, [0, 0], [2, 1], 0.05, 5)
    assert d == pytest.approx(math.sqrt(3), abs=1e-12)
    validate_path(flat2, path)


def test_unreachable_target_gives_zero(flat2):
    d, path = time_separation(flat2, [0, 0], [0.5, 1.0], 0.05, 5)
    assert d == 0.0 and len(path) == 0


@settings(max_examples=15, deadline=None)
@given(a=st.integers(20, 40), b=st.integers(-15, 15))
def test_dp_is_a_lower_bound_close_to_exact(flat2, a, b):
    dx = 0.05
    exact = math.sqrt((a * dx) ** 2 - (b * dx) ** 2)
    d, path = time_separation(flat2, [0, 0], [a * dx, b * dx], dx, 5)
    assert d <= exact + 1e-12
    assert d >= 0.97 * exact
    assert lorentz_length(flat2, path) == pytest.approx(d, abs=1e-9)


def test_compiled_and_numpy_sweeps_agree(conformal2):
    f = conformal2.meta["factor"]
    eta = np.diag([-1.0, 1.0])
    custom = MetricField(2, K.CUSTOM, g_fn=lambda P: f(P)[:, None, None] ** 2 * eta,
                         orient_fn=lambda P: np.tile([1.0, 0.0], (len(P), 1)))
    p, q = np.zeros(2), np.array([1.0, 0.3])
    g1 = build_graph(conformal2, p, q, 0.05, 2, rule="midpoint")
    g2 = build_graph(custom, p, q, 0.05, 2, rule="midpoint")
    v1, v2 = run_dp(g1).values, run_dp(g2).values
    np.testing.assert_array_equal(np.isfinite(v1), np.isfinite(v2))
    ok = np.isfinite(v1)
    np.testing.assert_allclose(v1[ok], v2[ok], rtol=1e-10, atol=1e-12)


def test_dp_is_deterministic(conformal2):
    g = build_graph(conformal2, [0, 0], [1.5, 0.4], 0.02, 3)
    a, b = run_dp(g), run_dp(g)
    np.testing.assert_array_equal(a.values, b.values)
    np.testing.assert_array_equal(a.pred, b.pred)


def test_superadditivity_along_a_maximizer(conformal2):
    d, path, res = time_separation(conformal2, [0, 0], [2.0, 0.4], 0.02, 3, return_result=True)
    mid = path.vertices[len(path) // 2]
    d1, _ = time_separation(conformal2, [0, 0], mid, 0.02, 3)
    d2, _ = time_separation(conformal2, mid, [2.0, 0.4], 0.02, 3)
    assert d >= d1 + d2 - 1e-9


def test_refinement_never_shortens(conformal2):
    d, path = time_separation(conformal2, [0, 0], [2.0, 0.4], 0.05, 2)
    better = refine_maximizer(conformal2, path.simplified(), 10, step=0.05)
    assert lorentz_length(conformal2, better, "simpson") >= lorentz_length(conformal2, path, "simpson") - 1e-12
    np.testing.assert_allclose(better.end, path.end)


def test_empty_stencil_for_narrow_cone():
    # null directions (1, 0.4) and (1, 0.6): no k=1 stencil vector is causal
    m = make_constant([[0.24, -0.5], [-0.5, 1.0]], [1.0, 0.5], [1, 0])
    with pytest.raises(EmptyStencil):
        build_graph(m, [0, 0], [1.0, 0.5], 0.05, 1)
    d, _ = time_separation(m, [0, 0], [1.0, 0.5], 0.05, 2)
    assert d == pytest.approx(0.1, abs=1e-12)
