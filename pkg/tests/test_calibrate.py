import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lorentzlab.calibrate import (Calibration, boundary_flowline_witness, check_calibrated, duality_check,
                                  fourier_modes, hedlund_lstar, is_pseudo_time, l_infty)
from lorentzlab.hedlund import BASES
from lorentzlab.spacetime import CausalPath

CAL = Calibration([1.0, 0.2], [((1, 0), 0.03, -0.01), ((1, 2), 0.0, 0.02)])


@given(x=st.floats(-2, 2), y=st.floats(-2, 2))
def test_omega_is_the_gradient_of_tau(x, y):
    h = 1e-6
    p = np.array([[x, y]])
    num = [(CAL.tau(p + h * e) - CAL.tau(p - h * e))[0] / (2 * h) for e in np.eye(2)]
    np.testing.assert_allclose(CAL.omega(p)[0], num, atol=1e-6)


def test_tau_is_equivariant(rng):
    X = rng.uniform(-1, 1, (100, 2))
    assert CAL.equivariance_error(X, [[1, 0], [0, 1], [2, -3]]) < 1e-12


def test_hedlund_lstar():
    assert hedlund_lstar([0.5, 0.3, 0.2], [0.5, 0.6, 0.2]) == pytest.approx(1.0)


def test_l_infty_on_flat(flat2):
    assert l_infty(flat2, [1.0, 0.0]) == pytest.approx(1.0)
    assert l_infty(flat2, [2.0, 0.5]) == pytest.approx(math.sqrt(4 - 0.25))
    assert l_infty(flat2, [0.0, 1.0]) == -math.inf


def test_l_infty_is_minus_infinity_for_tube_metric(hedlund, hedlund_params):
    assert l_infty(hedlund, hedlund_params.lam) == -math.inf


def test_line_defects(hedlund, hedlund_params):
    lam = hedlund_params.lam
    cal = Calibration(lam, lstar=1.0)
    for f in range(3):
        V = np.tile(BASES[f], (11, 1))
        V[:, f] += np.linspace(0, 1, 11)
        assert check_calibrated(hedlund, cal, CausalPath(V))["defect"] < 1e-12


def test_pseudo_time_on_flat(flat2):
    good = is_pseudo_time(flat2, Calibration([1.0, 0.0]), 1.0, 300)
    assert good["pass"] and good["strictly_increasing"]
    bad = is_pseudo_time(flat2, Calibration([-1.0, 0.0]), 1.0, 300)
    assert not bad["pass"]


def test_one_sided_duality_on_flat(flat2):
    rep = duality_check(flat2, [1.0, 0.0], 1.0, trials=30)
    assert rep["pass"]
    assert rep["best"] == pytest.approx(1.0, abs=1e-9)


def test_fourier_modes_count():
    assert len(fourier_modes(2, 1)) == 4
    assert len(fourier_modes(3, 2)) == (5 ** 3 - 1) // 2


def test_boundary_flowline_witness():
    rep = boundary_flowline_witness(Calibration([1.0, 0.0]), delta=1e-3)
    assert rep["integral"] == pytest.approx(-(1 - 2e-3), abs=1e-9)
    assert rep["negative"]
