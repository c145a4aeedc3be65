"""Free-boundary update map for the diffracted shock.

One outer step takes the density field computed on the grid fitted to the
old shock, integrates the shock slope equation dr/dtheta = g backward
from P1 (all densities evaluated along the OLD shock position), patches
the curve near the wedge when it dips below c0 + delta, and projects the
result onto the discrete admissible set:

  K1: r(theta1) = r1
  K2: r'(theta_w) = 0
  K3: r(theta_w) >= c0 + delta
  K4: 0 <= r' <= r1^2 / c0

The Case-2 patch replaces the curve on [theta_w, theta_j] by
c0 + delta + A (theta-theta_w)^3 + B (theta-theta_w)^n with (A, B, n)
chosen so the junction is C^1 and K2/K3 hold exactly.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .physics import cbar_sq, shock_rhs_polar

# Exponent cap for the patch tail term; (theta-theta_w)^n underflows for
# huge n and only K2/K3 matter downstream.
_PATCH_N_CAP = 64


@dataclass(frozen=True)
class ShockCurve:
    """Sampled free boundary r(theta) on [theta_w, theta1]."""

    theta: np.ndarray
    r: np.ndarray
    r_prime: np.ndarray
    patch: dict | None = None
    events: tuple = field(default_factory=tuple)

    def __post_init__(self):
        if not np.all(np.diff(self.theta) > 0):
            raise ValueError("ShockCurve: theta samples must be strictly increasing")

    @property
    def theta_w(self):
        return float(self.theta[0])

    @property
    def theta1(self):
        return float(self.theta[-1])

    def radius_at(self, theta):
        out = np.interp(theta, self.theta, self.r)
        return out if np.ndim(out) else float(out)

    def slope_at(self, theta):
        out = np.interp(theta, self.theta, self.r_prime)
        return out if np.ndim(out) else float(out)

    def cartesian_trace(self):
        """(xi, eta) samples of the curve, foot to P1."""
        return self.r * np.cos(self.theta), self.r * np.sin(self.theta)

    def foot_radius(self):
        return float(self.r[0])


def default_samples(geom, n_theta=None):
    """Sample count for shock curves: finer than the flow grid."""
    base = 512 if n_theta is None else max(4 * n_theta, 512)
    return base + 1


def k_violations(curve, rs, geom, tol=0.0):
    """Dict of K1-K4 violation magnitudes (0.0 means satisfied)."""
    smax = geom.r1**2 / geom.c0
    v = {
        "K1": abs(float(curve.r[-1]) - geom.r1),
        "K2": abs(float(curve.r_prime[0])),
        "K3": max(0.0, geom.c0 + rs.delta - float(curve.r[0])),
        "K4": max(
            0.0,
            float(np.max(curve.r_prime)) - smax,
            float(-np.min(curve.r_prime)),
        ),
    }
    return {k: (0.0 if val <= tol else val) for k, val in v.items()}


def in_K(curve, rs, geom, tol=0.0):
    return all(v == 0.0 for v in k_violations(curve, rs, geom, tol=tol).values())


def initial_shock(geom, rs, n=None):
    """Smooth monotone initial guess in K: cubic blend up to r1, flat at
    the wedge.  The foot starts strictly below xi1: the diffracted shock
    is weaker at the wall than at P1, and a foot at xi1 is the plane
    incident shock, a spurious fixed point of the update map."""
    n = default_samples(geom) if n is None else n
    theta = np.linspace(geom.theta_w, geom.theta1, n)
    foot = max(geom.c0 + rs.delta, 0.5 * (geom.c0 + geom.xi1))
    t = (theta - geom.theta_w) / (geom.theta1 - geom.theta_w)
    span = geom.r1 - foot
    r = foot + span * t * t * (3.0 - 2.0 * t)
    rp = span * 6.0 * t * (1.0 - t) / (geom.theta1 - geom.theta_w)
    r[-1] = geom.r1
    return ShockCurve(theta=theta, r=r, r_prime=rp)


def frozen_line_curve(geom, gas, rho, theta_lo=None, n=None):
    """Exact solution of the slope ODE for constant density rho:
    r(theta) = cbar / cos(theta - theta*), a straight line in (xi, eta)
    through P1.  Oracle for the integrator."""
    n = default_samples(geom) if n is None else n
    cb = math.sqrt(float(cbar_sq(rho, gas.rho0, gas)))
    theta_star = geom.theta1 - math.acos(min(cb / geom.r1, 1.0))
    lo = geom.theta_w if theta_lo is None else theta_lo
    if lo - theta_star <= -math.pi / 2:
        raise ValueError("frozen_line_curve: line diverges before theta_lo")
    theta = np.linspace(lo, geom.theta1, n)
    r = cb / np.cos(theta - theta_star)
    rp = r * np.tan(theta - theta_star)
    return ShockCurve(theta=theta, r=r, r_prime=rp)


def _shock_density(field, old_shock):
    """Density along the old shock as a function of theta."""

    def rho_at(theta):
        return field.interpolate(old_shock.radius_at(theta), theta)

    return rho_at


def integrate_shock(field, old_shock, rs, gas, n_steps=None, rho_at=None):
    """New shock position r~(theta) = r1 + int_{theta1}^{theta} g ds.

    Both the radius and the density entering the slope g are evaluated
    along the OLD shock, so the update is a plain quadrature (marched by
    the classical 4-stage rule, which for a fixed integrand reduces to
    Simpson steps).  At the foot g vanishes identically because the foot
    Dirichlet density satisfies cbar(rho_bar) = r(theta_w), which is what
    makes the updated curve flat against the wall.

    A radicand below the dead band clips g to 0 with an event record
    (the discrete analogue of the shock flattening onto the sonic circle
    of the outer state); the dead band itself absorbs roundoff from the
    cbar inversion so the foot slope is exactly zero.
    """
    if rho_at is None:
        rho_at = _shock_density(field, old_shock)
    theta_w, theta1 = old_shock.theta_w, old_shock.theta1
    if n_steps is None:
        n_steps = len(old_shock.theta) - 1
    theta = np.linspace(theta_w, theta1, n_steps + 1)
    h = (theta1 - theta_w) / n_steps

    events = []

    def g(th):
        r = float(old_shock.radius_at(th))
        # the discrete trace can undershoot rho0 by the solver tolerance
        # when the shock is very weak; the physical density cannot
        rho = max(float(rho_at(th)), gas.rho0)
        cb2 = float(cbar_sq(rho, gas.rho0, gas))
        rad = r * r - cb2
        if rad < -1e-9 * cb2:
            events.append(("radicand_clip", float(th), float(r)))
            return 0.0
        if rad < 1e-12 * cb2:
            return 0.0
        return r * math.sqrt(rad / cb2)

    g_full = np.array([g(t) for t in theta])
    g_half = np.array([g(t) for t in theta[:-1] + 0.5 * h])

    r = np.empty_like(theta)
    r[-1] = old_shock.r[-1]
    steps = (h / 6.0) * (g_full[1:] + 4.0 * g_half + g_full[:-1])
    r[:-1] = r[-1] - np.cumsum(steps[::-1])[::-1]
    return ShockCurve(theta=theta, r=r, r_prime=g_full, events=tuple(events))


def _patch_poly(theta, theta_w, c0, delta, A, B, n):
    s = theta - theta_w
    return c0 + delta + A * s**3 + B * s**n


def _patch_poly_slope(theta, theta_w, A, B, n):
    s = theta - theta_w
    return 3.0 * A * s**2 + n * B * s ** (n - 1)


# Undercuts smaller than this fraction of delta are left to the
# admissibility projection (a floor clip).  Without the dead band the
# patch branch toggles on and off across outer iterations whenever the
# converged foot sits exactly on the floor, and the finite curve change
# it causes sustains a limit cycle.
_PATCH_DEADBAND = 0.05


def patch_case2(raw, rs, gas, geom):
    """Apply the near-wedge cubic patch when the raw curve undercuts
    c0 + delta by more than the dead band; identity otherwise."""
    c0, delta = geom.c0, rs.delta
    if raw.r[0] >= c0 + delta - _PATCH_DEADBAND * delta:
        return raw

    def val(th):
        return raw.radius_at(th)

    if val(raw.theta1) <= c0 + 2.0 * delta:
        raise RuntimeError("patch_case2: raw curve never clears c0 + 2 delta")
    # theta_a: crossing of c0 + delta (exists since raw is monotone and
    # undercuts at the wedge); theta_b: crossing of c0 + 2 delta, which
    # makes a = raw(theta_b) - c0 - delta equal to delta exactly.
    theta_a = brentq(lambda th: val(th) - (c0 + delta), raw.theta_w, raw.theta1, xtol=1e-10)
    theta_b = brentq(lambda th: val(th) - (c0 + 2.0 * delta), theta_a, raw.theta1, xtol=1e-10)

    a = val(theta_b) - c0 - delta
    b = raw.slope_at(theta_b)
    x1 = theta_b - raw.theta_w

    if 3.0 * a <= b * x1:
        c1, c0s = geom.r1, c0
        big_c = (c1 / c0s) * math.sqrt(c1 * c1 - c0s * c0s) * (geom.theta1 - geom.theta_w)
        n = min(math.ceil(big_c / delta) + 1, _PATCH_N_CAP)
        n = max(n, 4)
    else:
        # shrink the junction until 3a = b x1 (largest root below theta_b)
        def gap(th):
            return 3.0 * (val(th) - c0 - delta) - raw.slope_at(th) * (th - raw.theta_w)

        ths = np.linspace(raw.theta_w, theta_b, 2049)
        gs = np.array([gap(t) for t in ths])
        idx = np.where((gs[:-1] <= 0.0) & (gs[1:] > 0.0))[0]
        if len(idx) == 0:
            raise RuntimeError("patch_case2: no junction with 3a = b x1 found")
        k = idx[-1]
        theta_b = brentq(gap, ths[k], ths[k + 1], xtol=1e-10)
        a = val(theta_b) - c0 - delta
        b = raw.slope_at(theta_b)
        x1 = theta_b - raw.theta_w
        n = 4

    A = (n * a - b * x1) / ((n - 3.0) * x1**3)
    B = (b * x1 - 3.0 * a) / ((n - 3.0) * x1**n)

    theta = raw.theta
    on_patch = theta <= theta_b
    r = np.where(on_patch, _patch_poly(theta, raw.theta_w, c0, delta, A, B, n), raw.r)
    rp = np.where(on_patch, _patch_poly_slope(theta, raw.theta_w, A, B, n), raw.r_prime)
    meta = {"theta_a": float(theta_a), "tau": float(theta_b - theta_a),
            "A": float(A), "B": float(B), "n": int(n)}
    return ShockCurve(theta=theta, r=r, r_prime=rp, patch=meta, events=raw.events)


def project_K(curve, rs, geom):
    """Project onto the discrete admissible set; identity on members."""
    if in_K(curve, rs, geom):
        return curve
    smax = geom.r1**2 / geom.c0
    rp = np.clip(curve.r_prime, 0.0, smax)
    rp[0] = 0.0
    theta = curve.theta
    # rebuild r from the pinned endpoint so the curve stays continuous
    r = np.empty_like(curve.r)
    r[-1] = geom.r1
    seg = 0.5 * (rp[1:] + rp[:-1]) * np.diff(theta)
    r[:-1] = geom.r1 - np.cumsum(seg[::-1])[::-1]
    # floor at the state-(0) circle offset
    floor = geom.c0 + rs.delta
    if r[0] < floor:
        below = r < floor
        r = np.maximum(r, floor)
        rp = np.where(below, 0.0, rp)
        rp[0] = 0.0
    r[-1] = geom.r1
    return ShockCurve(theta=theta, r=r, r_prime=rp, patch=curve.patch, events=curve.events)


def trace_density(grid, faces, gas):
    """Shock-trace density as a function of theta, from the face values
    carried by the oblique rows; anchored at rho1 where the shock meets
    the sonic arc."""
    t_nodes = np.concatenate([grid.theta_centers[: grid.n_lower],
                              [grid.geom.theta1]])
    vals = np.concatenate([faces, [gas.rho1]])

    def rho_at(theta):
        return np.interp(theta, t_nodes, vals)

    return rho_at


def update_map(field, old_shock, rs, gas, geom, faces=None):
    """One application of the free-boundary map J with the admissibility
    post-processing: integrate, patch, project.

    When face values are given, the slope equation samples the density
    from the shock trace itself rather than from interior cell centers;
    the trace is where the foot Dirichlet value propagates, so using it
    is what couples the free boundary to rho_bar.
    """
    rho_at = None
    if faces is not None:
        rho_at = trace_density(field.grid, faces, gas)
    raw = integrate_shock(field, old_shock, rs, gas, rho_at=rho_at)
    patched = patch_case2(raw, rs, gas, geom)
    return project_K(patched, rs, geom)
