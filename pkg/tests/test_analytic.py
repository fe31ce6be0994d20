from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from molmagic import analytic as an
from molmagic import units as u
from molmagic.model import rbcs as load_rbcs

GHz = lambda x: u.angular(x, "GHz")  # noqa: E731


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 60), st.floats(0.0, np.pi / 2))
def test_angular_factor_bounds(J, theta):
    f = an.angular_factors(J, theta)
    assert f.A >= 0.0 and f.B > 0.0
    assert f.A + f.B <= 1.0 + 1e-15


def test_angular_factors_low_J():
    assert an.angular_factors(0, 0.7).A == 0.0
    assert an.angular_factors(0, 0.7).B == pytest.approx(1 / 3)
    for theta in np.linspace(0, np.pi / 2, 7):
        c2 = np.cos(theta) ** 2
        f = an.angular_factors(1, theta)
        assert f.A == pytest.approx(c2 / 3)
        assert f.B == pytest.approx((3 + c2) / 15)


def test_printed_convention_agrees_where_it_should():
    for J in (0, 1):
        for theta in (0.0, 0.5, np.pi / 2):
            assert an.angular_factors(J, theta, "printed").A == pytest.approx(an.angular_factors(J, theta).A)
    for J in range(2, 8):
        assert an.angular_factors(J, 0.0, "printed").A == pytest.approx(an.angular_factors(J, 0.0).A)
        assert an.angular_factors(J, np.pi / 2, "printed").A != pytest.approx(an.angular_factors(J, np.pi / 2).A)
    with pytest.raises(ValueError):
        an.angular_factors(2, 0.0, "other")


def test_large_J_factors_approach_one_eighth():
    # at theta = 90 deg both factors tend to 1/8 with a 1/J correction
    devs = []
    for J in (40, 400, 4000):
        f = an.angular_factors(J, np.pi / 2)
        devs.append(max(abs(f.A - 0.125), abs(f.B - 0.125)))
    assert devs[1] < 1e-3
    assert devs[0] / devs[1] == pytest.approx(10, rel=0.1)
    assert devs[1] / devs[2] == pytest.approx(10, rel=0.02)


def test_branch_poles_rbcs(rbcs):
    bp = an.branch_poles(1, rbcs.Bv, rbcs.Bvp)
    assert u.to_freq(bp.L, "GHz") == pytest.approx(2.00, abs=1e-12)
    assert u.to_freq(bp.R, "GHz") == pytest.approx(-1.06, abs=1e-12)
    for J in range(1, 10):
        b = an.branch_poles(J, rbcs.Bv, rbcs.Bvp)
        assert b.L > b.R


@pytest.mark.parametrize("J", range(6))
def test_equal_constants_pole_spacing(J):
    b = an.branch_poles(J, 1.0, 1.0)
    assert b.L - b.R == pytest.approx(4 * J + 2)


@settings(max_examples=100, deadline=None)
@given(st.floats(-500.0, 500.0).filter(lambda d: abs(d) > 0.01), st.floats(0.0, np.pi / 2))
def test_low_J_closed_forms(det_GHz, theta):
    params = load_rbcs()
    pole = params.pole(0)
    d = GHz(det_GHz)
    if min(abs(d + o) for o in (0.0, GHz(2.0), GHz(-1.06))) < GHz(1e-3):
        return
    assert an.alpha_analytic(0, theta, d, params, pole) == pytest.approx(an.alpha_j0(d, params, pole), rel=1e-12)
    assert an.alpha_analytic(1, theta, d, params, pole) == pytest.approx(
        an.alpha_j1(d, theta, params, pole), rel=1e-12, abs=1e-14
    )


def test_theta_90_removes_left_pole(rbcs):
    pole = rbcs.pole(0)
    near = [an.alpha_analytic(1, np.pi / 2, GHz(-2.0 + s), rbcs, pole) for s in (-1e-6, 1e-6)]
    assert abs(near[0] - near[1]) < 1e-6
    tilted = [an.alpha_analytic(1, 0.0, GHz(-2.0 + s), rbcs, pole) for s in (-1e-6, 1e-6)]
    assert np.sign(tilted[0]) != np.sign(tilted[1])


def test_pole_singularity(rbcs):
    pole = rbcs.pole(0)
    with pytest.raises(an.PoleSingularityError):
        an.alpha_analytic(0, 0.0, 0.0, rbcs, pole)


def test_critical_detuning(rbcs):
    assert u.to_freq(an.critical_detuning(rbcs, rbcs.pole(0)), "GHz") == pytest.approx(240.0, rel=0.02)
    flat = replace(rbcs, alpha_bg_par=rbcs.alpha_bg_perp)
    with pytest.raises(an.DegenerateBackgroundError):
        an.critical_detuning(flat, flat.pole(0))


@pytest.mark.parametrize("J", [0, 1, 2, 3])
@pytest.mark.parametrize("det", [30.0, 217.0, -400.0])
def test_remainder_bound(rbcs, J, det):
    pole = rbcs.pole(0)
    theta = 0.4
    exact = an.alpha_analytic(J, theta, GHz(det), rbcs, pole)
    rem = an.remainder_T(J, theta, GHz(det), rbcs, pole)
    approx = an.two_term(J, theta, GHz(det), rbcs, pole) + rem.leading
    assert abs(exact - approx) <= rem.bound * (1 + 1e-9) + 1e-15


def test_remainder_needs_large_detuning(rbcs):
    with pytest.raises(ValueError):
        an.remainder_T(2, 0.0, GHz(0.5), rbcs, rbcs.pole(0))


def test_window_bracket_is_common(rbcs):
    # at the critical detuning the common bracket vanishes, so alpha_J is nearly a_perp for all J
    pole = rbcs.pole(0)
    d = an.critical_detuning(rbcs, pole)
    perp = u.pol_to_lab(rbcs.alpha_bg_perp)
    for J in range(5):
        assert an.two_term(J, 0.0, d, rbcs, pole) == pytest.approx(perp, rel=1e-12)


def test_width_dipole_round_trip(rbcs):
    pole = rbcs.pole(1)
    mu = an.dipole_from_gamma(pole.gamma, pole.omega)
    assert an.gamma_from_dipole(mu, pole.omega) == pytest.approx(pole.gamma, rel=1e-12)
    with pytest.raises(ValueError):
        an.gamma_from_dipole(0.0, pole.omega)


def test_lower_criterion(rbcs):
    c = an.criterion_lower(rbcs, rbcs.pole(0))
    assert u.to_freq(c.bound, "kHz") == pytest.approx(0.125, rel=0.01)
    verdicts = [an.criterion_lower(rbcs, p).passed for p in rbcs.poles]
    assert verdicts == [True, True, True, False]


def test_criteria_scale_with_width(rbcs):
    pole = rbcs.pole(1)
    wide = replace(pole, gamma=2 * pole.gamma)
    lo, lo2 = an.criterion_lower(rbcs, pole), an.criterion_lower(rbcs, wide)
    assert lo2.bound == pytest.approx(lo.bound, rel=1e-12)
    assert lo2.ratio == pytest.approx(2 * lo.ratio)
    up, up2 = an.criterion_upper(rbcs, pole), an.criterion_upper(rbcs, wide)
    assert up2.ratio == pytest.approx(up.ratio / 2)


def test_upper_criterion_needs_neighbor(rbcs):
    assert an.neighbor(rbcs, rbcs.pole(0)).vprime == 1
    assert an.criterion_upper(rbcs, rbcs.pole(0)).passed
    with pytest.raises(an.MissingNeighborError):
        an.criterion_upper(rbcs, rbcs.pole(3))
