"""Outer fixed-point iteration and regularization continuation.

One outer step, for frozen regularization (eps, delta):

  1. fit the grid to the current shock curve,
  2. refresh the foot Dirichlet value rho_bar = cbar^{-1}(r(theta_w)),
  3. solve the fixed-boundary density problem (damped Picard),
  4. apply the free-boundary map (integrate / patch / project),
  5. under-relax the shock toward the update.

The admissible set K is convex, so the relaxed curve of two members
stays admissible; every accepted iterate is checked.  An oscillation
detector halves the shock relaxation factor when the drift grows.

continuation_solve runs a decreasing schedule of (eps, delta) pairs,
warm-starting each stage from the previous one.
"""

from dataclasses import dataclass, field as dc_field

import numpy as np

from .elliptic import RegularizationState, solve_fixed_boundary
from .errors import ConvergenceError
from .mesh import DensityField, build_grid, constant_field
from .physics import invert_cbar
from .shockcurve import (ShockCurve, default_samples, in_K, initial_shock,
                         k_violations, update_map)

DELTA_RATIO = 0.4


@dataclass(frozen=True)
class ContinuationSchedule:
    stages: tuple  # of RegularizationState, eps strictly decreasing

    def __post_init__(self):
        eps = [s.eps for s in self.stages]
        if not self.stages or any(b >= a for a, b in zip(eps, eps[1:])):
            raise ValueError("stages must have strictly decreasing eps")

    @classmethod
    def default(cls, eps0=0.1, n_stages=4, delta_ratio=DELTA_RATIO):
        stages = tuple(
            RegularizationState(eps0 * 0.5**k, delta_ratio * eps0 * 0.5**k)
            for k in range(n_stages)
        )
        return cls(stages=stages)


@dataclass
class SolveState:
    """Converged (or last) state of one continuation stage."""

    geom: object
    reg: RegularizationState
    shock: ShockCurve
    field: DensityField
    faces: np.ndarray
    rho_bar: float
    outer_iterations: int
    converged: bool
    drift_history: list = dc_field(default_factory=list)
    k_history: list = dc_field(default_factory=list)   # k_violations per iterate
    elliptic_reports: list = dc_field(default_factory=list)
    case: str = ""


def classify_case(shock, reg, geom):
    """Foot classification: "case1" strictly above the inner sonic
    circle, "case2" pinned at the delta offset, "case3" flat at the
    offset over an initial interval."""
    margin = max(2.0 * reg.delta, 1e-3 * geom.c0)
    foot = shock.foot_radius()
    if foot > geom.c0 + reg.delta + margin:
        return "case1"
    span = shock.theta1 - shock.theta_w
    flat = shock.theta <= shock.theta_w + 0.05 * span
    if np.all(shock.r[flat] <= geom.c0 + reg.delta + 1e-9 * geom.c0):
        return "case3"
    return "case2"


def _relax_shock(old, new, omega):
    return ShockCurve(
        theta=old.theta,
        r=old.r + omega * (new.r - old.r),
        r_prime=old.r_prime + omega * (new.r_prime - old.r_prime),
        patch=new.patch,
        events=new.events,
    )


def fixed_point_solve(geom, reg, shock0=None, w0=None, *, n_sigma=64,
                      n_theta=64, omega=0.5, omega_fb=0.25, tol_fb=2e-6,
                      max_outer=400, tol_nl=None, max_iters=200,
                      first_order_form="plain", raise_on_fail=True):
    """Alternate density solves with the free-boundary map until the
    sup-norm shock drift falls below tol_fb."""
    gas = geom.gas
    shock = shock0 if shock0 is not None else initial_shock(
        geom, reg, n=default_samples(geom, n_theta))
    if not in_K(shock, reg, geom, tol=1e-12):
        raise ValueError(f"initial shock outside K: {k_violations(shock, reg, geom)}")

    state = SolveState(
        geom=geom, reg=reg, shock=shock, field=None, faces=None,
        rho_bar=float("nan"), outer_iterations=0, converged=False,
    )
    tol_floor = 1e-8 * gas.rho1 if tol_nl is None else tol_nl
    w = w0
    faces = None
    halvings = 0
    decreases = 0
    drift = np.inf
    for outer in range(1, max_outer + 1):
        grid = build_grid(geom, shock, n_sigma, n_theta)
        rho_bar = invert_cbar(shock.foot_radius(), gas.rho0, gas)
        if w is None:
            w_field = constant_field(grid, gas.rho1)
        else:
            w_field = DensityField(grid=grid, rho=np.array(w, dtype=float))
        # the density only needs to be resolved to a fraction of the
        # current shock drift; tighten as the outer loop converges.  A
        # warm-started first iterate solves tightly at once (the inner
        # warm start makes that cheap, and it keeps a re-run from a
        # converged state a single outer step)
        if outer == 1 and w is not None:
            tol_eff = max(tol_floor, 0.02 * tol_fb)
        else:
            tol_eff = min(1e-4 * gas.rho1, max(tol_floor, 0.02 * drift))
        field, faces, rep = solve_fixed_boundary(
            grid, reg, rho_bar, w_field, faces, omega=omega, tol_nl=tol_eff,
            max_iters=max_iters, first_order_form=first_order_form,
            raise_on_fail=raise_on_fail)
        new_shock = update_map(field, shock, reg, gas, geom, faces=faces)
        drift = float(np.max(np.abs(new_shock.r - shock.r)))

        state.drift_history.append(drift)
        state.elliptic_reports.append(rep)
        if len(state.drift_history) >= 3:
            d = state.drift_history
            if d[-1] > d[-2] > tol_fb and d[-2] > d[-3] * 0.95 and halvings < 3:
                omega_fb *= 0.5
                halvings += 1
                decreases = 0
            elif d[-1] < d[-2]:
                # recover the relaxation factor once the drift has been
                # shrinking steadily; early transients should not slow
                # the whole stage down
                decreases += 1
                if decreases >= 8 and halvings > 0:
                    omega_fb *= 2.0
                    halvings -= 1
                    decreases = 0
            else:
                decreases = 0

        if drift < tol_fb:
            # keep the curve the density was solved on, so the returned
            # state is self-consistent (grid, rho_bar and field all
            # belong to the same shock)
            state.converged = True
        else:
            shock = _relax_shock(shock, new_shock, omega_fb)
        state.k_history.append(k_violations(shock, reg, geom, tol=1e-10))
        state.shock = shock
        state.field = field
        state.faces = faces
        state.rho_bar = rho_bar
        state.outer_iterations = outer
        w = field.rho
        if state.converged:
            break
    state.case = classify_case(shock, reg, geom)
    if not state.converged and raise_on_fail:
        raise ConvergenceError(
            f"outer iteration stalled at drift {state.drift_history[-1]:.3e} "
            f"after {state.outer_iterations} steps (tol {tol_fb:.3e})",
            history=state.drift_history,
        )
    return state


def continuation_solve(geom, schedule=None, *, n_sigma=64, n_theta=64,
                       shock0=None, raise_on_fail=True, **kwargs):
    """Run the stage schedule with warm starts; returns the list of
    per-stage SolveStates (last entry is the final solution)."""
    if schedule is None:
        schedule = ContinuationSchedule.default()
    states = []
    shock = shock0
    w = None
    for reg in schedule.stages:
        if shock is not None and shock.foot_radius() < geom.c0 + reg.delta:
            # a smaller delta never invalidates K3; a larger one would
            raise ValueError("schedule delta increased above current foot")
        st = fixed_point_solve(geom, reg, shock0=shock, w0=w,
                               n_sigma=n_sigma, n_theta=n_theta,
                               raise_on_fail=raise_on_fail, **kwargs)
        states.append(st)
        shock = st.shock
        w = st.field.rho
    return states
