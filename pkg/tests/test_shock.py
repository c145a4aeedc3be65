"""Free-boundary update map: quadrature oracle, admissibility set,
near-wedge patch, and projection."""

import math

import numpy as np
import pytest

from shockdiff.elliptic import RegularizationState
from shockdiff.geometry import WedgeSetup, derive_geometry
from shockdiff.mesh import build_grid, constant_field
from shockdiff.physics import GasModel, cbar_sq
from shockdiff.shockcurve import (ShockCurve, default_samples,
                                  frozen_line_curve, in_K, initial_shock,
                                  integrate_shock, k_violations, patch_case2,
                                  project_K, update_map)

GAS = GasModel(2.0, 1.0, 2.0)


def _geometry(theta_w=-math.pi / 2):
    return derive_geometry(WedgeSetup(GAS, theta_w))


def _line_error(rho, n_steps, theta_lo):
    """Max relative error of one quadrature update applied to the exact
    straight-shock solution with frozen density rho.  The old curve is
    sampled at 2 n_steps + 1 points so every quadrature node coincides
    with a sample and no interpolation error enters."""
    geom = _geometry(-math.pi / 4)
    exact = frozen_line_curve(geom, GAS, rho, theta_lo=theta_lo,
                              n=2 * n_steps + 1)
    new = integrate_shock(None, exact, RegularizationState(0.05, 0.02), GAS,
                          n_steps=n_steps, rho_at=lambda th: rho)
    ref = exact.radius_at(new.theta)
    return float(np.max(np.abs(new.r - ref) / ref)), new


def test_line_oracle_accuracy():
    err, new = _line_error(2.0, 424, theta_lo=0.1)
    assert err < 1e-6
    assert len(new.events) == 0


def test_line_oracle_step_halving_ratio():
    # the accumulated rule is fourth order: halving the step divides the
    # error by ~16
    e_coarse, _ = _line_error(1.7, 32, theta_lo=0.1)
    e_fine, _ = _line_error(1.7, 64, theta_lo=0.1)
    assert 12.0 <= e_coarse / e_fine <= 20.0


def test_constant_incident_density_returns_flat_slope_at_foot():
    # when the trace density satisfies cbar(rho) = r at the foot the
    # integrand vanishes there; the dead band makes the slope exactly 0
    geom = _geometry()
    rs = RegularizationState(0.1, 0.04)
    shock = initial_shock(geom, rs)
    foot = shock.foot_radius()
    from shockdiff.physics import invert_cbar
    rho_bar = invert_cbar(foot, GAS.rho0, GAS)
    new = integrate_shock(None, shock, rs, GAS,
                          rho_at=lambda th: rho_bar)
    assert new.r_prime[0] == 0.0


def test_plane_shock_is_fixed_point_of_quadrature():
    # density frozen at rho1 with the vertical incident shock: the line
    # through P1 is reproduced (it is the spurious fixed point the
    # initial guess is built to avoid)
    geom = _geometry()
    line = frozen_line_curve(geom, GAS, 2.0, theta_lo=0.1, n=1025)
    new = integrate_shock(None, line, RegularizationState(0.05, 0.02), GAS,
                          n_steps=512, rho_at=lambda th: 2.0)
    assert np.max(np.abs(new.r - line.radius_at(new.theta))) < 1e-6


def test_initial_shock_admissible_and_below_plane_foot():
    geom = _geometry()
    for rs in (RegularizationState(0.1, 0.04), RegularizationState(0.0125, 0.005)):
        s = initial_shock(geom, rs)
        assert in_K(s, rs, geom, tol=1e-12)
        assert s.foot_radius() < geom.xi1
        assert s.r[-1] == geom.r1
        assert s.r_prime[0] == 0.0


def test_k_violations_detects_each_constraint():
    geom = _geometry()
    rs = RegularizationState(0.1, 0.04)
    s = initial_shock(geom, rs)
    v = k_violations(s, rs, geom)
    assert all(val == 0.0 for val in v.values())

    r = s.r.copy()
    r[-1] += 1e-3
    bad = ShockCurve(theta=s.theta, r=r, r_prime=s.r_prime)
    assert k_violations(bad, rs, geom)["K1"] > 0.0

    rp = s.r_prime.copy()
    rp[0] = 0.01
    bad = ShockCurve(theta=s.theta, r=s.r, r_prime=rp)
    assert k_violations(bad, rs, geom)["K2"] > 0.0

    r = s.r.copy()
    r[0] = geom.c0 + 0.5 * rs.delta
    bad = ShockCurve(theta=s.theta, r=r, r_prime=s.r_prime)
    assert k_violations(bad, rs, geom)["K3"] > 0.0

    rp = s.r_prime.copy()
    rp[10] = -0.1
    bad = ShockCurve(theta=s.theta, r=s.r, r_prime=rp)
    assert k_violations(bad, rs, geom)["K4"] > 0.0


def test_patch_case2_junction_and_constraints():
    # a monotone raw curve that undercuts the floor gets replaced near
    # the wedge by the cubic-plus-tail polynomial; the junction is C^1
    # and K2/K3 hold exactly
    geom = _geometry()
    rs = RegularizationState(0.1, 0.04)
    n = 801
    theta = np.linspace(geom.theta_w, geom.theta1, n)
    t = (theta - geom.theta_w) / (geom.theta1 - geom.theta_w)
    lo = geom.c0 - 0.05   # undercuts c0 + delta by more than the dead band
    r = lo + (geom.r1 - lo) * t**2
    rp = 2.0 * (geom.r1 - lo) * t / (geom.theta1 - geom.theta_w)
    raw = ShockCurve(theta=theta, r=r, r_prime=rp)
    patched = patch_case2(raw, rs, GAS, geom)
    assert patched.patch is not None
    assert patched.r[0] == pytest.approx(geom.c0 + rs.delta, abs=1e-12)
    assert patched.r_prime[0] == 0.0
    meta = patched.patch
    tb = meta["theta_a"] + meta["tau"]
    # value and slope continuity at the junction, from the polynomial
    # coefficients (the sampled interpolant carries its own h^2 error)
    s_j = tb - geom.theta_w
    val = geom.c0 + rs.delta + meta["A"] * s_j**3 + meta["B"] * s_j ** meta["n"]
    slope = 3.0 * meta["A"] * s_j**2 \
        + meta["n"] * meta["B"] * s_j ** (meta["n"] - 1)
    assert val == pytest.approx(raw.radius_at(tb), abs=1e-8)
    assert slope == pytest.approx(raw.slope_at(tb), abs=1e-6)
    # patched region stays at or above the floor
    assert np.min(patched.r) >= geom.c0 + rs.delta - 1e-12


def test_patch_case2_dead_band_identity():
    # undercuts smaller than the dead band are left to the projection
    geom = _geometry()
    rs = RegularizationState(0.1, 0.04)
    s = initial_shock(geom, rs)
    r = s.r.copy()
    r -= (s.foot_radius() - (geom.c0 + rs.delta))  # foot exactly on floor
    r[0] -= 0.01 * rs.delta                        # tiny undercut
    raw = ShockCurve(theta=s.theta, r=r, r_prime=s.r_prime)
    assert patch_case2(raw, rs, GAS, geom) is raw


def test_patch_coefficient_algebra():
    # closed form: A = (n a - b x1) / ((n-3) x1^3),
    #              B = (b x1 - 3 a) / ((n-3) x1^n);
    # with n = 4, a = 1e-3, x1 = 0.1, b = 3a/x1 the tail drops out
    n, a, x1 = 4, 1e-3, 0.1
    b = 3.0 * a / x1
    A = (n * a - b * x1) / ((n - 3.0) * x1**3)
    B = (b * x1 - 3.0 * a) / ((n - 3.0) * x1**n)
    assert A == pytest.approx(1.0, rel=1e-12)
    assert B == pytest.approx(0.0, abs=1e-12)
    # junction value a and slope b are reproduced by the polynomial
    assert A * x1**3 + B * x1**n == pytest.approx(a, rel=1e-12)
    assert 3 * A * x1**2 + n * B * x1 ** (n - 1) == pytest.approx(b, rel=1e-12)


def test_project_K_identity_on_members():
    geom = _geometry()
    rs = RegularizationState(0.1, 0.04)
    s = initial_shock(geom, rs)
    assert project_K(s, rs, geom) is s


def test_project_K_clips_slope_spike():
    geom = _geometry()
    rs = RegularizationState(0.1, 0.04)
    s = initial_shock(geom, rs)
    rp = s.r_prime.copy()
    smax = geom.r1**2 / geom.c0
    rp[100] = 2.0 * smax
    rp[200] = -0.5
    bad = ShockCurve(theta=s.theta, r=s.r, r_prime=rp)
    proj = project_K(bad, rs, geom)
    assert in_K(proj, rs, geom, tol=1e-12)
    assert proj.r[-1] == geom.r1
    assert float(np.max(proj.r_prime)) <= smax
    assert float(np.min(proj.r_prime)) >= 0.0


def test_update_map_preserves_admissibility():
    # one full map application (integrate, patch, project) on random
    # constant density fields lands in K
    geom = _geometry()
    rs = RegularizationState(0.1, 0.04)
    shock = initial_shock(geom, rs)
    grid = build_grid(geom, shock, 32, 32)
    rng = np.random.default_rng(19)
    for _ in range(10):
        rho = rng.uniform(1.2, 2.0)
        field = constant_field(grid, rho)
        new = update_map(field, shock, rs, GAS, geom)
        assert in_K(new, rs, geom, tol=1e-10)


def test_default_samples_scaling():
    geom = _geometry()
    assert default_samples(geom) == 513
    assert default_samples(geom, 64) == 513
    assert default_samples(geom, 256) == 1025
