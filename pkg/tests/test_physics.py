"""Closed-form algebra: pressure law, shock-average speed, jump
conditions, oblique-derivative coefficients, and slope branches."""

import math

import numpy as np
import pytest

from shockdiff.errors import PoleError, RadicandError
from shockdiff.physics import (GasModel, JumpState, beta_cartesian,
                               beta_polar, cbar_sq, df_dcbar2_forms,
                               invert_cbar, jump_mn, pressure, rh_residual,
                               shock_rhs_cartesian, shock_rhs_polar,
                               sound_speed_sq)

GAS = GasModel(2.0, 1.0, 2.0)


def test_gas_model_validation():
    with pytest.raises(ValueError):
        GasModel(1.0, 1.0, 2.0)
    with pytest.raises(ValueError):
        GasModel(2.0, 2.0, 1.0)
    with pytest.raises(ValueError):
        GasModel(2.0, -1.0, 2.0)


def test_reference_constants():
    # gamma = 2: p = rho^2 / 2, c^2 = rho, cbar^2 = (rho + rho0) / 2
    assert pressure(2.0, GAS) == 2.0
    assert sound_speed_sq(2.0, GAS) == 2.0
    assert GAS.c0 == 1.0
    assert GAS.c1 == math.sqrt(2.0)
    assert cbar_sq(2.0, 1.0, GAS) == pytest.approx(1.5, rel=1e-15)
    # m1^2 = [p][rho] = (2 - 0.5) * 1
    assert GAS.m1 == pytest.approx(math.sqrt(1.5), rel=1e-15)


def test_positivity_guards():
    with pytest.raises(ValueError):
        pressure(-1.0, GAS)
    with pytest.raises(ValueError):
        sound_speed_sq(0.0, GAS)
    with pytest.raises(ValueError):
        cbar_sq(0.5, 1.0, GAS)


def test_cbar_continuous_at_rho0():
    # the series branch must match the quotient branch across the cut
    gas = GasModel(1.4, 1.0, 2.0)
    base = float(sound_speed_sq(1.0, gas))
    for rel in (1e-10, 1e-9, 1e-8, 1e-7, 1e-6):
        v = float(cbar_sq(1.0 + rel, 1.0, gas))
        assert abs(v - base) < 2.0 * rel
    # across the series cut the quotient branch carries ~1e-8 relative
    # cancellation noise; continuity only holds to that level
    lo = float(cbar_sq(1.0 + 0.99e-8, 1.0, gas))
    hi = float(cbar_sq(1.0 + 1.01e-8, 1.0, gas))
    assert abs(hi - lo) < 5e-8


def test_invert_cbar_roundtrip():
    rng = np.random.default_rng(7)
    for _ in range(50):
        gas = GasModel(1.0 + 2.0 * rng.uniform(0.1, 1.0),
                       rng.uniform(0.5, 2.0), 10.0)
        rho = gas.rho0 * (1.0 + rng.uniform(0.0, 5.0))
        r = math.sqrt(float(cbar_sq(rho, gas.rho0, gas)))
        back = invert_cbar(r, gas.rho0, gas)
        assert back == pytest.approx(rho, rel=1e-11)


def test_invert_cbar_sonic_endpoint_exact():
    assert invert_cbar(GAS.c0, GAS.rho0, GAS) == GAS.rho0
    with pytest.raises(ValueError):
        invert_cbar(0.5 * GAS.c0, GAS.rho0, GAS)


def test_beta_polar_hand_checked():
    # rho = 2, rho0 = 1, gamma = 2, r = 1.3, r' = 0.5:
    # c^2 = 2, cbar^2 = 1.5, r^2 = 1.69
    # beta1 = 0.5 (2 * 0.19 - 3 * 1.5 * 0.31) = -0.5075
    # beta2 = 6 * 0.19 - 1.5 * 0.31 = 0.675
    # mu = -2 * 1.69 * 0.5 * 0.5 = -0.845
    b1, b2, mu = beta_polar(2.0, 1.0, 1.3, 0.5, GAS)
    assert b1 == pytest.approx(-0.5075, abs=1e-12)
    assert b2 == pytest.approx(0.675, abs=1e-12)
    assert mu == pytest.approx(-0.845, abs=1e-12)


def test_beta_polar_obliqueness_identity():
    # mu must equal beta . (1, -r') for random admissible states
    rng = np.random.default_rng(11)
    for _ in range(200):
        rho = rng.uniform(1.05, 2.0)
        cb = math.sqrt(float(cbar_sq(rho, 1.0, GAS)))
        r = cb * (1.0 + rng.uniform(0.0, 0.4))
        rp = float(shock_rhs_polar(r, rho, 1.0, GAS))
        b1, b2, mu = beta_polar(rho, 1.0, r, rp, GAS)
        assert mu == pytest.approx(b1 - b2 * rp, rel=1e-10, abs=1e-12)


def _eta_prime_from_polar(r, theta, rp):
    s, c = math.sin(theta), math.cos(theta)
    return (rp * s + r * c) / (rp * c - r * s)


def test_cartesian_slope_matches_polar():
    rng = np.random.default_rng(13)
    count = 0
    while count < 200:
        rho = rng.uniform(1.05, 1.95)
        cb2 = float(cbar_sq(rho, 1.0, GAS))
        r = math.sqrt(cb2) * (1.0 + rng.uniform(0.01, 0.4))
        theta = rng.uniform(-1.2, 0.45)
        xi, eta = r * math.cos(theta), r * math.sin(theta)
        if abs(xi * xi - cb2) < 1e-3:
            continue
        rp = float(shock_rhs_polar(r, rho, 1.0, GAS))
        if abs(rp * math.cos(theta) - r * math.sin(theta)) < 1e-3:
            continue
        ep_polar = _eta_prime_from_polar(r, theta, rp)
        ep_cart = float(shock_rhs_cartesian(xi, eta, rho, 1.0, GAS))
        assert ep_cart == pytest.approx(ep_polar, rel=1e-9, abs=1e-9)
        count += 1


def test_beta_cartesian_transversal_on_line_curves():
    # along the straight-shock solutions (constant density) the
    # cartesian coefficient pair must stay strictly oblique to the
    # curve, with one fixed sign once the normal is oriented by the
    # parametrization
    from shockdiff.geometry import WedgeSetup, derive_geometry
    from shockdiff.shockcurve import frozen_line_curve

    geom = derive_geometry(WedgeSetup(GAS, -math.pi / 4))
    for rho in (1.2, 1.4, 1.6, 1.8):
        cur = frozen_line_curve(geom, GAS, rho, theta_lo=0.05, n=41)
        for th, r, rp in zip(cur.theta[1:-1], cur.r[1:-1], cur.r_prime[1:-1]):
            s, c = math.sin(th), math.cos(th)
            den = rp * c - r * s
            ep = (rp * s + r * c) / den
            bc1, bc2 = beta_cartesian(rho, 1.0, r * c, r * s, ep, GAS)
            assert (-ep * bc1 + bc2) * math.copysign(1.0, den) < 0.0


def test_beta_cartesian_regression_pin():
    # frozen spot value guarding the transcription against edits
    bc1, bc2 = beta_cartesian(1.5, 1.0, 0.9, 0.9, 0.4, GAS)
    assert bc1 == pytest.approx(3.8016, rel=1e-10)
    assert bc2 == pytest.approx(0.06318, rel=1e-10)


def test_jump_identity_random_states():
    # [p][rho] = [m]^2 + [n]^2 whenever r' is the consistent slope branch
    rng = np.random.default_rng(23)
    for _ in range(500):
        rho = rng.uniform(1.01, 2.0)
        cb = math.sqrt(float(cbar_sq(rho, 1.0, GAS)))
        r = cb * (1.0 + rng.uniform(0.0, 0.5))
        theta = rng.uniform(-1.5, 0.5)
        rp = float(shock_rhs_polar(r, rho, 1.0, GAS))
        js = JumpState(rho_in=rho, rho_out=1.0, r=r, theta=theta, r_prime=rp)
        dp = float(pressure(rho, GAS) - pressure(1.0, GAS))
        assert abs(rh_residual(js, GAS)) < 1e-10 * dp * (rho - 1.0)


def test_jump_mn_degenerate_radius():
    with pytest.raises(ValueError):
        jump_mn(JumpState(2.0, 1.0, 0.0, 0.1, 0.0), GAS)


def test_shock_rhs_errors():
    with pytest.raises(RadicandError):
        shock_rhs_polar(1.0, 2.0, 1.0, GAS)   # r^2 = 1 < cbar^2 = 1.5
    cb = math.sqrt(1.5)
    with pytest.raises(PoleError):
        shock_rhs_cartesian(cb, 0.5, 2.0, 1.0, GAS)
    with pytest.raises(RadicandError):
        shock_rhs_cartesian(0.5, 0.5, 2.0, 1.0, GAS)


def test_df_dcbar2_forms_agree_and_positive():
    rng = np.random.default_rng(29)
    for _ in range(500):
        cb2 = rng.uniform(0.5, 2.0)
        r = math.sqrt(cb2) * (1.0 + rng.uniform(0.01, 0.8))
        theta = rng.uniform(-1.4, 1.4)
        xi, eta = r * math.cos(theta), r * math.sin(theta)
        if abs(xi * eta - math.sqrt(cb2 * (r * r - cb2))) < 1e-6:
            continue
        raw, factored = df_dcbar2_forms(xi, eta, cb2)
        assert raw == pytest.approx(factored, rel=1e-10, abs=1e-13)
        assert factored > 0.0
    with pytest.raises(RadicandError):
        df_dcbar2_forms(0.1, 0.1, 1.0)
