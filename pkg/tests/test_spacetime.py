import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lorentzlab import HedlundParams, TrigPoly, make_conformally_flat, make_flat
from lorentzlab import _kernels as K
from lorentzlab.errors import NonCausalSegment, NonPositiveConformalFactor
from lorentzlab.spacetime import (CausalClass, CausalPath, MetricField, TangentVector, boundary_frame, classify,
                                  line_form, lorentz_length, lorentz_length_checked, pair_lengths, signature_ok,
                                  tube_distances, validate_path, verify_hedlund)

coord = st.floats(-3, 3, allow_nan=False)


@pytest.mark.parametrize("v, expected", [
    ((1, 0), CausalClass.TIMELIKE_FUTURE),
    ((-1, 0.2), CausalClass.TIMELIKE_PAST),
    ((1, 1), CausalClass.LIGHTLIKE_FUTURE),
    ((-1, 1), CausalClass.LIGHTLIKE_PAST),
    ((0.2, 1), CausalClass.SPACELIKE),
    ((0, 0), CausalClass.ZERO),
])
def test_classify_minkowski(flat2, v, expected):
    assert classify(flat2, TangentVector([0.3, 0.1], v)) == expected


@given(a=st.floats(0.1, 5), r=st.floats(0, 0.99))
def test_straight_segment_length_matches_closed_form(flat2, a, r):
    b = r * a
    path = CausalPath([[0, 0], [a, b]])
    assert lorentz_length(flat2, path) == pytest.approx(math.sqrt(a * a - b * b), rel=1e-12)


@given(a1=st.floats(0.1, 3), r1=st.floats(-0.95, 0.95), a2=st.floats(0.1, 3), r2=st.floats(-0.95, 0.95))
def test_reverse_triangle_inequality(flat2, a1, r1, a2, r2):
    u, v = np.array([a1, r1 * a1]), np.array([a2, r2 * a2])
    Lu = lorentz_length(flat2, CausalPath([[0, 0], u]))
    Lv = lorentz_length(flat2, CausalPath([[0, 0], v]))
    Luv = lorentz_length(flat2, CausalPath([[0, 0], u + v]))
    assert Luv >= Lu + Lv - 1e-12


@given(x=coord, y=coord, k1=st.integers(-3, 3), k2=st.integers(-3, 3))
def test_conformal_metric_is_periodic(conformal2, x, y, k1, k2):
    G0, O0 = conformal2.forms([x, y])
    G1, O1 = conformal2.forms([x + k1, y + k2])
    np.testing.assert_allclose(G0, G1, atol=1e-12)
    np.testing.assert_allclose(O0, O1, atol=1e-12)


@settings(max_examples=50)
@given(x=coord, y=coord, z=coord, k=st.tuples(*[st.integers(-2, 2)] * 3))
def test_tube_metric_is_periodic_and_lorentzian(hedlund, x, y, z, k):
    p = np.array([x, y, z])
    G0, _ = hedlund.forms(p)
    G1, _ = hedlund.forms(p + np.array(k))
    np.testing.assert_allclose(G0, G1, atol=1e-10)
    assert signature_ok(G0).all()


def test_conformal_lengths_match_numpy_route(conformal2, rng):
    f = conformal2.meta["factor"]
    eta = np.diag([-1.0, 1.0])
    custom = MetricField(2, K.CUSTOM, name="custom-conformal",
                         g_fn=lambda P: f(P)[:, None, None] ** 2 * eta,
                         orient_fn=lambda P: np.tile([1.0, 0.0], (len(P), 1)))
    A = rng.uniform(0, 1, (200, 2))
    D = rng.uniform(0.01, 0.1, (200, 1)) * np.column_stack([np.ones(200), rng.uniform(-0.9, 0.9, 200)])
    compiled = pair_lengths(conformal2, A, A + D, "midpoint")
    plain = pair_lengths(custom, A, A + D, "midpoint")
    np.testing.assert_allclose(compiled, plain, rtol=1e-12)


def test_spacelike_segment_is_rejected(flat2):
    path = CausalPath([[0, 0], [1, 0.5], [1.2, 2.0]])
    with pytest.raises(NonCausalSegment):
        validate_path(flat2, path)
    with pytest.raises(NonCausalSegment):
        lorentz_length(flat2, path)


def test_richardson_estimate_on_conformal_metric(conformal2):
    path = CausalPath(np.column_stack([np.linspace(0, 2, 41), 0.3 * np.linspace(0, 2, 41)]))
    val, err = lorentz_length_checked(conformal2, path)
    fine = lorentz_length(conformal2, path, subdivisions=64)
    assert abs(val - fine) <= max(10 * err, 1e-10)


def test_conformal_factor_must_be_positive():
    with pytest.raises(NonPositiveConformalFactor):
        make_conformally_flat(2, TrigPoly.sine(2, 1, 1.5))


def test_hedlund_params_normalise_and_validate():
    p = HedlundParams((5, 3, 2))
    np.testing.assert_allclose(p.lam, [0.5, 0.3, 0.2])
    with pytest.raises(ValueError):
        HedlundParams((1, -1, 1))
    with pytest.raises(ValueError):
        HedlundParams((1, 1, 1), eps=0)


def test_tube_metric_conditions(hedlund, hedlund_params):
    rep = verify_hedlund(hedlund, hedlund_params, samples=8000)
    assert rep["pass"]


def test_tube_metric_equals_line_form_on_lines(hedlund, hedlund_params):
    t = np.linspace(0, 1, 7)
    for f, base in enumerate([(0, 0, 0), (0, 0, 0.5), (0.5, 0.5, 0)]):
        P = np.tile(base, (len(t), 1)).astype(float)
        P[:, f] += t
        G, _ = hedlund.forms(P)
        np.testing.assert_array_equal(G, np.broadcast_to(line_form(hedlund_params.lambdas[f], f), G.shape))


@given(x=st.floats(-2, 2), y=st.floats(-2, 2))
def test_tube_distances_are_periodic(x, y):
    P = np.array([[x, y, 0.3]])
    np.testing.assert_allclose(tube_distances(P), tube_distances(P + 1.0), atol=1e-12)


@given(x=st.floats(0, 1), y=st.floats(0, 1))
def test_boundary_frame_is_null(boundary2, x, y):
    p = np.array([x, y])
    X1, X2 = boundary_frame(p)
    G, _ = boundary2.forms(p)
    scale = 1 + np.abs(G).max()
    assert abs(X1 @ G[0] @ X1) <= 1e-9 * scale
    assert abs(X2 @ G[0] @ X2) <= 1e-9 * scale


def test_flat_is_lorentzian_everywhere(flat3, rng):
    G, _ = flat3.forms(rng.uniform(0, 1, (50, 3)))
    assert signature_ok(G).all()
