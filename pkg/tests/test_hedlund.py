import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lorentzlab.errors import NotConstructible
from lorentzlab.hedlund import (BASES, LineSystem, accurate_length, any_chain, check_F30, check_L31,
                                count_tube_changes, guide_path, shadowing_check, standard_path, tube_maximizer)
from lorentzlab.spacetime import validate_path

EPS = 0.01


@pytest.fixture(scope="module")
def std():
    return standard_path(np.zeros(3), np.array([3.0, 2.0, 2.5]))


def test_families_of_bases():
    ls = LineSystem()
    for f, b in enumerate(BASES):
        assert ls.families_of(b) == [f]
    assert ls.families_of([0.3, 0.4, 0.1]) == []


@given(t=st.floats(-5, 5), k=st.tuples(st.integers(-3, 3), st.integers(-3, 3)))
def test_line_through_translates(t, k):
    p = np.array([t, float(k[0]), float(k[1])])
    line = LineSystem.line_through(p, 0)
    assert line is not None and line.distance(p)[0] == 0.0


def test_standard_path_shape(hedlund, std):
    assert std.meta["families"] == [0, 2, 1]
    validate_path(hedlund, std)
    assert count_tube_changes(std, EPS).changes == 2
    assert check_F30(std, EPS) >= 0


def test_three_segment_standard_path():
    p = standard_path(np.zeros(3), np.array([2.0, 1.5, 0.5]))
    assert p.meta["families"] == [0, 1]


def test_standard_path_needs_line_endpoints():
    with pytest.raises(NotConstructible):
        standard_path(np.zeros(3), np.array([3.0, 2.0, 2.0]))
    with pytest.raises(NotConstructible):
        guide_path(np.zeros(3), np.array([0.3, 0.2, 0.1]))


def test_any_chain_reaches_off_pattern_targets():
    p = BASES[1]
    q = p + np.array([1.0, 3.0, 2.0])
    path = any_chain(p, q)
    np.testing.assert_allclose(path.end, q)


def test_L31_literal_and_corrected_slack(hedlund, std):
    rep = check_L31(hedlund, std)
    # the (1 - 8 eps) factor is violated already by the standard path
    assert rep["slack_literal"] < 0
    assert rep["slack_corrected"] >= 0


def test_maximizer_on_a_line(hedlund):
    d, path, _ = tube_maximizer(hedlund, BASES[0], BASES[0] + [1.0, 0, 0])
    assert d == pytest.approx(0.5, abs=1e-12)


def test_maximizer_shadows_standard_path(hedlund, std):
    d, path, _ = tube_maximizer(hedlund, std.start, std.end, guide=std)
    assert d <= float(hedlund.meta["params"].lam @ (std.end - std.start)) + 1e-12
    assert d >= accurate_length(hedlund, std) - 1e-9
    assert shadowing_check(path, EPS, std) <= 4 * EPS + 2 * 0.0025
    assert count_tube_changes(path, EPS).changes <= 6
