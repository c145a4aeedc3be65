"""Fixed-boundary density solver: exactness on constants, manufactured
convergence, and the nonlinear Picard iteration."""

import math

import numpy as np
import pytest

from shockdiff.elliptic import (RegularizationState, cutoff,
                                solve_dirichlet_linear, solve_fixed_boundary)
from shockdiff.mesh import build_grid, constant_field
from shockdiff.physics import invert_cbar
from shockdiff.shockcurve import initial_shock

from _mms import exact_density, fixture_geometry, mms_problem, mms_shock


def test_regularization_state_validation():
    with pytest.raises(ValueError):
        RegularizationState(-0.1, 0.04)
    with pytest.raises(ValueError):
        RegularizationState(0.1, -0.04)


def test_cutoff_shape():
    # identity on the elliptic side, floor -eps/2 deep on the other,
    # monotone in between
    assert cutoff(1.0, 0.1) == 1.0
    assert cutoff(-1.0, 0.1) == -0.05
    s = np.linspace(-2.0, 2.0, 401)
    v = np.asarray(cutoff(s, 0.1))
    assert np.all(v >= -0.05)
    assert np.all(np.diff(v) >= -1e-14)
    # eps = 0 degenerates to the positive part
    assert cutoff(-1.0, 0.0) == 0.0


def test_constants_are_discrete_solutions():
    # with constant Dirichlet data, no source, and zero conormal data a
    # constant density solves the scheme to solver precision
    gas, geom = fixture_geometry()
    grid = build_grid(geom, mms_shock(geom), 24, 24)
    const = 1.8
    w = np.full(grid.shape, const)
    for form in ("plain", "cutoff"):
        field = solve_dirichlet_linear(
            grid, RegularizationState(0.05, 0.02), w,
            np.full(grid.n_theta, const), first_order_form=form)
        assert np.max(np.abs(field.rho - const)) < 1e-11


def test_mms_convergence_both_forms():
    # quick two-level order check; the acceptance suite runs the full
    # three-level version in max norm
    for form in ("plain", "cutoff"):
        errors = []
        for n in (16, 32):
            grid, w, rhs, dirichlet, neu_lo, neu_hi, r_cells, th_cells = \
                mms_problem(n)
            field = solve_dirichlet_linear(
                grid, RegularizationState(0.05, 0.02), w, dirichlet,
                neumann_lo=neu_lo, neumann_hi=neu_hi, rhs_cells=rhs,
                first_order_form=form)
            exact = exact_density(r_cells, th_cells)
            errors.append(float(np.max(np.abs(field.rho - exact))))
        order = math.log2(errors[0] / errors[1])
        assert order > 1.5, f"{form}: order {order} from errors {errors}"


def test_fixed_boundary_solve_reaches_tolerance():
    gas, geom = fixture_geometry()
    rs = RegularizationState(0.1, 0.04)
    shock = initial_shock(geom, rs)
    grid = build_grid(geom, shock, 24, 24)
    rho_bar = invert_cbar(shock.foot_radius(), gas.rho0, gas)
    w0 = constant_field(grid, gas.rho1)
    field, faces, report = solve_fixed_boundary(grid, rs, rho_bar, w0,
                                                tol_nl=1e-9)
    assert report.converged
    assert report.final_update < 1e-9
    # face trace interpolates between the foot value and rho1
    assert faces[0] == pytest.approx(rho_bar, rel=1e-6)
    assert rho_bar - 1e-6 <= report.rho_min
    assert report.rho_max <= gas.rho1 + 1e-6
    # regularized ellipticity margin stays positive at this eps
    assert report.ellipticity_margin > -rs.eps


def test_fixed_boundary_warm_start_is_cheaper():
    gas, geom = fixture_geometry()
    rs = RegularizationState(0.1, 0.04)
    shock = initial_shock(geom, rs)
    grid = build_grid(geom, shock, 24, 24)
    rho_bar = invert_cbar(shock.foot_radius(), gas.rho0, gas)
    cold, faces, rep_cold = solve_fixed_boundary(
        grid, rs, rho_bar, constant_field(grid, gas.rho1), tol_nl=1e-9)
    warm, _, rep_warm = solve_fixed_boundary(
        grid, rs, rho_bar, cold, faces, tol_nl=1e-9)
    assert rep_warm.iterations < rep_cold.iterations
    assert np.max(np.abs(warm.rho - cold.rho)) < 1e-7
