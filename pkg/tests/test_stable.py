import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lorentzlab.errors import NotInDualCone, ZeroLengthPath
from lorentzlab.spacetime import CausalPath
from lorentzlab.stable import (check_T17_properties, convex_hausdorff, dual_stable, estimate_cone, field_table,
                               rotation_vector, stable_time_separation, zero_in_hull)


@pytest.fixture(scope="module")
def flat_table(flat2):
    ang = np.linspace(-0.6, 0.6, 13)
    return field_table(flat2, np.column_stack([np.ones_like(ang), ang]), R=5.0, spacing=0.025)


def test_rotation_vector():
    path = CausalPath([[0, 0], [1, 0], [1, 1]])
    np.testing.assert_allclose(rotation_vector(path), [0.5, 0.5])
    with pytest.raises(ZeroLengthPath):
        rotation_vector(CausalPath([[0.0, 0.0]]))


def test_convex_hausdorff_examples():
    sq = np.array([[0, 0], [1, 0], [0, 1], [1, 1]], float)
    assert convex_hausdorff(sq, sq) == 0.0
    assert convex_hausdorff(sq, sq + [0.5, 0]) == pytest.approx(0.5)
    # interior points do not change the hull
    assert convex_hausdorff(np.vstack([sq, [[0.5, 0.5]]]), sq) == 0.0


@given(st.lists(st.tuples(st.floats(-1, 1), st.floats(-1, 1)), min_size=3, max_size=12),
       st.tuples(st.floats(-1, 1), st.floats(-1, 1)))
def test_convex_hausdorff_symmetric_and_translation_bounded(pts, shift):
    X = np.array(pts)
    s = np.array(shift)
    d = convex_hausdorff(X, X + s)
    assert d == pytest.approx(convex_hausdorff(X + s, X), abs=1e-9)
    assert d <= np.linalg.norm(s) + 1e-9


def test_zero_in_hull():
    assert zero_in_hull(np.array([[1.0, 0.0], [-1.0, 0.0]]))
    assert not zero_in_hull(np.array([[1.0, 0.0], [1.0, 1.0]]))


def test_flat_cone_recovery(flat2):
    c = estimate_cone(flat2, R=10.0)
    assert c.hausdorff_to(flat2.meta["cone"]) <= 0.05
    assert not c.zero_in_hull
    assert c.flag([1.0, 0.0]) == "in"
    assert c.flag([0.0, 1.0]) == "out"


def test_flat_stable_time_separation_is_the_minkowski_norm(flat2):
    val, err, info = stable_time_separation(flat2, [2.0, 1.0], (1, 2, 4))
    assert val == pytest.approx(math.sqrt(3), abs=1e-9)
    assert err >= 0
    assert info["superadditive"]


def test_spacelike_direction_is_outside(flat2):
    val, err, info = stable_time_separation(flat2, [0.2, 1.0], (1, 2))
    assert val == 0.0 and info["flag"] == "outside"


def test_tube_metric_stable_time_separation_on_a_line(hedlund):
    val, err, info = stable_time_separation(hedlund, [1.0, 0.0, 0.0], (2, 4))
    assert val == pytest.approx(0.5, abs=1e-12)


def test_field_table_matches_oracle(flat_table):
    ex = np.sqrt(np.maximum(flat_table.directions[:, 0] ** 2 - flat_table.directions[:, 1] ** 2, 0))
    ok = np.array([f == "in" for f in flat_table.flags])
    assert ok.sum() >= 10
    assert np.all(np.abs(flat_table.values - ex)[ok] <= flat_table.errs[ok])


def test_field_table_superadditive_and_concave(flat_table):
    prop = check_T17_properties(flat_table, pairs=300)
    assert prop["superadditivity_violations"] == 0
    assert prop["concavity_violations"] == 0


@settings(max_examples=20, deadline=None)
@given(c=st.floats(0.1, 10), a=st.floats(0.2, 3))
def test_dual_stable_is_positively_homogeneous(flat_table, c, a):
    alpha = np.array([a, 0.1 * a])
    assert dual_stable(flat_table, c * alpha) == pytest.approx(c * dual_stable(flat_table, alpha), rel=1e-9)


def test_dual_stable_rejects_covectors_outside_the_dual_cone(flat_table):
    with pytest.raises(NotInDualCone):
        dual_stable(flat_table, [-1.0, 0.0])
    assert dual_stable(flat_table, [1.0, 0.0]) == pytest.approx(1.0, abs=0.01)


def test_stable_table_csv(flat_table, tmp_path):
    f = tmp_path / "t.csv"
    flat_table.write_csv(str(f))
    assert f.read_text().splitlines()[0] == "h1,h2,ell,err,N,flag"
