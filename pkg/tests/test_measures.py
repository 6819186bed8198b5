import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lorentzlab.errors import EmptyPath, NonCausalCell
from lorentzlab.measures import (average_length, direction_bin, find_maximal_measure, icosphere_centres,
                                 invariance_defect, mixture, occupation_measure, rotation_class)
from lorentzlab.spacetime import CausalPath


def straight(v, length=3.0, start=(0.1, 0.3)):
    v = np.asarray(v, float)
    return CausalPath([start, np.asarray(start) + length * v / np.linalg.norm(v)])


def test_icosphere_bins():
    C = icosphere_centres()
    assert C.shape == (320, 3)
    np.testing.assert_allclose(np.linalg.norm(C, axis=1), 1.0)
    np.testing.assert_array_equal(direction_bin(C), np.arange(320))


def test_measure_of_a_straight_path():
    mu = occupation_measure(straight([1.0, 0.5]))
    assert mu.mass == pytest.approx(1.0)
    u = np.array([1.0, 0.5]) / math.hypot(1.0, 0.5)
    np.testing.assert_allclose(rotation_class(mu), u, atol=1e-12)


def test_average_length_of_flat_directions(flat2):
    mu = occupation_measure(straight([1.0, 0.5]))
    assert average_length(flat2, mu) == pytest.approx(math.sqrt(0.75 / 1.25), rel=1e-12)
    assert average_length(flat2, occupation_measure(straight([1.0, 1.0]))) == pytest.approx(0.0, abs=1e-7)


def test_spacelike_cells_are_rejected(flat2):
    with pytest.raises(NonCausalCell):
        average_length(flat2, occupation_measure(straight([0.0, 1.0])))


def test_empty_path():
    with pytest.raises(EmptyPath):
        occupation_measure(CausalPath([[0.0, 0.0]]))


@given(w=st.lists(st.floats(0.01, 1), min_size=3, max_size=3))
def test_rotation_class_is_linear_in_mixtures(w):
    mus = [occupation_measure(straight(v)) for v in ([1, 0], [1, 0.5], [1, -0.3])]
    w = np.array(w)
    mix = mixture(mus, w)
    expect = sum(c * rotation_class(mu) for c, mu in zip(w, mus))
    np.testing.assert_allclose(rotation_class(mix), expect, atol=1e-12)
    assert mix.mass == pytest.approx(w.sum())


@settings(max_examples=20)
@given(k1=st.integers(-2, 2), k2=st.integers(-2, 2))
def test_closed_orbit_is_invariant(k1, k2):
    # a closed geodesic of the flat torus: (1, 0) for three periods
    mu = occupation_measure(straight([1.0, 0.0], 3.0))
    f = lambda X: np.sin(2 * np.pi * (k1 * X[:, 0] + k2 * X[:, 1]))
    assert abs(invariance_defect(mu, f)) < 1e-6


def test_csv_header(tmp_path):
    mu = occupation_measure(straight([1.0, 0.2]))
    f = tmp_path / "m.csv"
    mu.write_csv(str(f))
    lines = f.read_text().splitlines()
    assert lines[0] == "cell,x1,x2,v1,v2,weight"
    assert len(lines) == len(mu.keys) + 1


def test_tube_metric_maximal_measure(hedlund):
    mu, L, rep = find_maximal_measure(hedlund, [0.0, 1.0, 0.0], N=2)
    assert L == pytest.approx(0.3, abs=1e-12)
    np.testing.assert_allclose(rep["rotation"], [0, 1, 0], atol=1e-12)
