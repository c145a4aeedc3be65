"""Self-similar shock diffraction solver for the nonlinear wave system.

A plane shock meets a convex wedge corner; behind the diffracted shock
the flow is governed by a degenerate elliptic equation for the density
in self-similar coordinates, coupled to the free shock boundary through
the Rankine-Hugoniot conditions.  The package solves the regularized
problem by a fixed-point iteration between a fixed-boundary elliptic
solve and a shock update map, drives the regularization to zero by
continuation, and certifies the result with a suite of structural
checks (ellipticity, density bounds, shock convexity, sonic-layer
regularity, momentum recovery).
"""

from .diagnostics import (DiagnosticsReport, recover_momentum, run_all,
                          sonic_layer_analysis)
from .driver import (ContinuationSchedule, SolveState, classify_case,
                     continuation_solve, fixed_point_solve)
from .elliptic import (EllipticSolveReport, RegularizationState,
                       solve_fixed_boundary)
from .errors import ConvergenceError, PoleError, RadicandError
from .geometry import DerivedGeometry, WedgeSetup, derive_geometry
from .mesh import DensityField, MappedGrid, build_grid, constant_field
from .physics import (GasModel, JumpState, beta_cartesian, beta_polar,
                      cbar_sq, df_dcbar2_forms, invert_cbar, jump_mn,
                      pressure, rh_residual, shock_rhs_cartesian,
                      shock_rhs_polar, sound_speed_sq)
from .shockcurve import (ShockCurve, frozen_line_curve, in_K, initial_shock,
                         integrate_shock, k_violations, patch_case2,
                         project_K, trace_density, update_map)

__version__ = "0.1.0"

__all__ = [
    "ContinuationSchedule", "ConvergenceError", "DensityField",
    "DerivedGeometry", "DiagnosticsReport", "EllipticSolveReport",
    "GasModel", "JumpState", "MappedGrid", "PoleError", "RadicandError",
    "RegularizationState", "ShockCurve", "SolveState", "WedgeSetup",
    "beta_cartesian", "beta_polar", "build_grid", "cbar_sq",
    "classify_case", "constant_field", "continuation_solve",
    "derive_geometry", "df_dcbar2_forms", "fixed_point_solve",
    "frozen_line_curve", "in_K", "initial_shock", "integrate_shock",
    "invert_cbar", "jump_mn", "k_violations", "patch_case2", "pressure",
    "project_K", "recover_momentum", "rh_residual", "run_all",
    "shock_rhs_cartesian", "shock_rhs_polar", "solve_fixed_boundary",
    "sonic_layer_analysis", "sound_speed_sq", "trace_density",
    "update_map",
]
