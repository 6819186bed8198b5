import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lorentzlab.errors import NotCrossingConfiguration
from lorentzlab.graphcheck import (SupportSample, crossing_gain, holder_check, lemma20a_check, light_cone_distance,
                                   lipschitz_check, minkowski_ladder, minkowski_pair, straight_segment)


@given(a=st.floats(0.1, 1), r=st.floats(-0.99, 0.99))
def test_light_cone_distance_minkowski(a, r):
    G = np.diag([-1.0, 1.0])[None]
    v = np.array([[a, r * a]])
    expect = (a - abs(r * a)) / math.sqrt(2)
    assert light_cone_distance(G, v)[0] == pytest.approx(expect, abs=1e-12)


@given(d=st.floats(1e-4, 0.1))
def test_minkowski_pair_distances(d):
    s = minkowski_pair(d)
    assert np.linalg.norm(s.points[1] - s.points[0]) == pytest.approx(d * d, rel=1e-12)
    assert np.linalg.norm(s.tangents[1] - s.tangents[0]) == pytest.approx(d, rel=1e-9)


def test_minkowski_ladder():
    lad = minkowski_ladder()
    assert lad["exponent"] == pytest.approx(0.5, abs=0.05)
    assert lad["lipschitz_growth"] >= 10


def test_holder_and_lipschitz_on_a_parallel_family():
    s = SupportSample(np.column_stack([np.zeros(5), np.linspace(0, 0.4, 5)]), np.tile([1.0, 0.0], (5, 1)))
    assert holder_check(s)["injective"]
    assert lipschitz_check(s)["K_prime"] == pytest.approx(1.0)


def test_crossing_gain_routes_agree(flat2):
    u = np.array([1.0, 0.0])
    w = np.array([math.cos(0.2), math.sin(0.2)])
    x1 = straight_segment([0, 0], u, 0.1)
    x2 = straight_segment([0.0, 0.001], w, 0.1)
    exact = crossing_gain(flat2, x1, x2, route="exact")
    dp = crossing_gain(flat2, x1, x2, stencil_k=3)
    assert exact > 0
    assert dp == pytest.approx(exact, abs=1e-8)


def test_non_crossing_configuration(flat2):
    x1 = straight_segment([0, 0], [1.0, 0.0], 0.1)
    x2 = straight_segment([0, 1.0], [1.0, 0.0], 0.1)
    with pytest.raises(NotCrossingConfiguration):
        crossing_gain(flat2, x1, x2, route="exact")


def test_lemma20a_on_flat_and_tube_metric(flat3, hedlund):
    for m in (flat3, hedlund):
        rep = lemma20a_check(m, 5000)
        assert rep["holds"]
        assert rep["eps_tilde"] > 0


@given(a=st.floats(0.2, 3), b=st.floats(-2, 2), d=st.floats(0.2, 3), ang=st.floats(0, 2 * math.pi))
def test_light_cone_distance_general_2d(a, b, d, ang):
    # -a x^2 + 2 b x y + d y^2 is Lorentzian for a, d > 0; its null set is two lines
    G = np.array([[-a, b], [b, d]])
    v = np.array([math.cos(ang), math.sin(ang)])
    disc = math.sqrt(b * b + a * d)
    best = math.inf
    for s in ((-b + disc) / d, (-b - disc) / d):
        n = np.array([1.0, s]) / math.hypot(1.0, s)
        best = min(best, float(np.linalg.norm(v - (v @ n) * n)))
    assert light_cone_distance(G[None], v[None])[0] == pytest.approx(best, abs=1e-9)
