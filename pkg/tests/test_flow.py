import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lorentzlab import _kernels as K
from lorentzlab.errors import SingularMetric
from lorentzlab.flow import (causal_character, christoffels, conformal_christoffels, flow_map, integrate_pregeodesic,
                             oracle_distance, speed_drift)
from lorentzlab.spacetime import MetricField


def unit(ang):
    return np.array([math.cos(ang), math.sin(ang)])


@given(x=st.floats(0, 1), y=st.floats(0, 1))
def test_conformal_christoffels_closed_form(conformal2, x, y):
    f = conformal2.meta["factor"]
    amp = 0.3

    def grad(p):
        return np.array([0.0, 2 * np.pi * amp * math.cos(2 * np.pi * p[1])])

    p = np.array([x, y])
    Gam, GR, T = christoffels(conformal2, p)
    np.testing.assert_allclose(Gam, conformal_christoffels(f, grad, p), atol=1e-7)
    assert not GR.any()


def test_flat_flow_is_straight(flat2):
    path = integrate_pregeodesic(flat2, ([0.0, 0.0], unit(0.4)), 3.0, 1e-2)
    np.testing.assert_allclose(path.end, 3.0 * unit(0.4), atol=1e-12)


@settings(max_examples=10, deadline=None)
@given(ang=st.floats(-0.7, 0.7))
def test_unit_speed_is_preserved(conformal2, ang):
    path = integrate_pregeodesic(conformal2, ([0.1, 0.2], unit(ang)), 10.0, 1e-3)
    assert speed_drift(path) < 1e-8


@settings(max_examples=5, deadline=None)
@given(ang=st.floats(-0.6, 0.6))
def test_pregeodesic_matches_affine_geodesic(conformal2, ang):
    assert oracle_distance(conformal2, ([0.1, 0.2], unit(ang)), 3.0, 1e-3) < 1e-6


def test_adaptive_and_fixed_step_agree(conformal2):
    a = integrate_pregeodesic(conformal2, ([0.0, 0.0], unit(0.3)), 4.0, 1e-3)
    b = integrate_pregeodesic(conformal2, ([0.0, 0.0], unit(0.3)), 4.0, 1e-2, method="rkf45")
    np.testing.assert_allclose(a.end, b.end, atol=1e-7)


def test_flow_map_composes(conformal2):
    v0 = ([0.0, 0.0], unit(-0.2))
    mid = flow_map(conformal2, v0, 1.5)
    two = flow_map(conformal2, (mid.base, mid.comp / np.linalg.norm(mid.comp)), 1.0)
    one = flow_map(conformal2, v0, 2.5)
    np.testing.assert_allclose(two.base, one.base, atol=1e-9)


def test_causal_character_keeps_its_sign(conformal2):
    path = integrate_pregeodesic(conformal2, ([0.0, 0.0], unit(0.5)), 5.0, 1e-3, record=50)
    assert np.all(causal_character(conformal2, path) < 0)
    path = integrate_pregeodesic(conformal2, ([0.0, 0.0], unit(1.2)), 5.0, 1e-3, record=50)
    assert np.all(causal_character(conformal2, path) > 0)


def test_initial_vector_must_be_unit(flat2):
    with pytest.raises(ValueError):
        integrate_pregeodesic(flat2, ([0.0, 0.0], [2.0, 0.0]), 1.0)


def test_singular_metric_is_reported():
    m = MetricField(2, K.CUSTOM, g_fn=lambda P: np.zeros((len(P), 2, 2)),
                    orient_fn=lambda P: np.tile([1.0, 0.0], (len(P), 1)))
    with pytest.raises(SingularMetric):
        christoffels(m, [0.0, 0.0])


def test_tube_metric_flow_keeps_speed(hedlund):
    v = np.ones(3) / math.sqrt(3)
    path = integrate_pregeodesic(hedlund, ([0.1, 0.2, 0.3], v), 2.0, 1e-3, method="rkf45")
    assert speed_drift(path) < 1e-8
