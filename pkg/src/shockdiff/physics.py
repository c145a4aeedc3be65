"""Closed-form gas-dynamic algebra for the nonlinear wave system.

Pressure law p = rho^gamma / gamma, sonic speed c^2 = rho^(gamma-1),
shock-average speed cbar^2 = (p(rho) - p(rho0)) / (rho - rho0), the
Rankine-Hugoniot momentum jumps, the oblique-derivative coefficients on
the diffracted shock, and the shock slope in polar and self-similar
Cartesian coordinates.

All functions are pure and work on scalars or numpy arrays.  Formulas are
kept in squared-speed form wherever possible so that nothing cancels
catastrophically near r = cbar.
"""

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .errors import PoleError, RadicandError

# Below this relative offset from rho0 the difference quotient for cbar^2
# is replaced by its two-term Taylor expansion.
_CBAR_SERIES_CUT = 1e-8


@dataclass(frozen=True)
class GasModel:
    """Polytropic gas with upstream density rho0 and downstream rho1."""

    gamma: float
    rho0: float
    rho1: float

    def __post_init__(self):
        if self.gamma <= 1.0:
            raise ValueError(f"gamma must exceed 1, got {self.gamma}")
        if not 0.0 < self.rho0 < self.rho1:
            raise ValueError(
                f"need 0 < rho0 < rho1, got rho0={self.rho0}, rho1={self.rho1}"
            )

    @property
    def c0(self):
        """Sonic speed of state (0)."""
        return float(np.sqrt(sound_speed_sq(self.rho0, self)))

    @property
    def c1(self):
        """Sonic speed of state (1); equals the sonic radius r1."""
        return float(np.sqrt(sound_speed_sq(self.rho1, self)))

    @property
    def m1(self):
        """Incident momentum sqrt((p(rho1)-p(rho0)) (rho1-rho0))."""
        dp = pressure(self.rho1, self) - pressure(self.rho0, self)
        return float(np.sqrt(dp * (self.rho1 - self.rho0)))


@dataclass(frozen=True)
class JumpState:
    """One point on a discontinuity separating rho_in from rho_out.

    r_prime is dr/dtheta of the discontinuity curve at (r, theta).
    """

    rho_in: float
    rho_out: float
    r: float
    theta: float
    r_prime: float


def pressure(rho, gas):
    """Pressure p(rho) = rho^gamma / gamma."""
    rho = np.asarray(rho, dtype=float)
    if np.any(rho <= 0.0):
        raise ValueError("pressure requires rho > 0")
    return rho**gas.gamma / gas.gamma


def sound_speed_sq(rho, gas):
    """Squared sonic speed c^2(rho) = p'(rho) = rho^(gamma-1)."""
    rho = np.asarray(rho, dtype=float)
    if np.any(rho <= 0.0):
        raise ValueError("sound_speed_sq requires rho > 0")
    return rho ** (gas.gamma - 1.0)


def cbar_sq(rho, rho0, gas):
    """Squared shock-average speed (p(rho) - p(rho0)) / (rho - rho0).

    Continuous at rho = rho0 where it equals c^2(rho0); a short Taylor
    expansion replaces the quotient when rho is within ~1e-8 rho0.
    """
    rho = np.asarray(rho, dtype=float)
    if np.any(rho < rho0 * (1.0 - 1e-13)):
        raise ValueError("cbar_sq requires rho >= rho0")
    g = gas.gamma
    drho = rho - rho0
    near = np.abs(drho) < _CBAR_SERIES_CUT * rho0
    # c^2(rho0) + p''(rho0)/2 * (rho - rho0)
    series = rho0 ** (g - 1.0) + 0.5 * (g - 1.0) * rho0 ** (g - 2.0) * drho
    with np.errstate(divide="ignore", invalid="ignore"):
        quotient = (rho**g - rho0**g) / (g * drho)
    out = np.where(near, series, quotient)
    return out if out.ndim else float(out)


def invert_cbar(r, rho0, gas, tol=1e-13):
    """Density rho_bar >= rho0 with cbar(rho_bar, rho0) = r.

    cbar is strictly increasing in rho, so a doubling bracket plus Brent
    iteration is robust.  r = c(rho0) returns rho0 exactly.
    """
    c0_sq = float(sound_speed_sq(rho0, gas))
    target = r * r
    if target < c0_sq * (1.0 - 1e-12):
        raise ValueError(f"invert_cbar: r={r} below sonic speed c(rho0)={np.sqrt(c0_sq)}")
    if target <= c0_sq * (1.0 + 1e-14):
        return float(rho0)

    hi = 2.0 * rho0
    for _ in range(200):
        if cbar_sq(hi, rho0, gas) >= target:
            break
        hi *= 2.0
    else:
        raise ValueError("invert_cbar: failed to bracket the root")

    def f(rho):
        return cbar_sq(rho, rho0, gas) - target

    root = brentq(f, rho0, hi, xtol=tol * rho0, rtol=1e-15)
    return float(root)


def jump_mn(js, gas):
    """Momentum jumps ([m], [n]) across the shock point js.

    [m] = (r' sin(theta)/r^2 + cos(theta)/r) [p],
    [n] = (-r' cos(theta)/r^2 + sin(theta)/r) [p].
    """
    if js.r == 0.0:
        raise ValueError("jump_mn: r = 0 is degenerate")
    dp = pressure(js.rho_in, gas) - pressure(js.rho_out, gas)
    s, c = np.sin(js.theta), np.cos(js.theta)
    jm = (js.r_prime * s / js.r**2 + c / js.r) * dp
    jn = (-js.r_prime * c / js.r**2 + s / js.r) * dp
    return float(jm), float(jn)


def rh_residual(js, gas):
    """Jump-identity residual [p][rho] - [m]^2 - [n]^2.

    Vanishes exactly when r_prime is the shock-slope branch consistent
    with the jump relations.
    """
    jm, jn = jump_mn(js, gas)
    dp = pressure(js.rho_in, gas) - pressure(js.rho_out, gas)
    drho = js.rho_in - js.rho_out
    return float(dp * drho - jm * jm - jn * jn)


def beta_polar(rho, rho0, r, r_prime, gas):
    """Oblique-derivative coefficients (beta1, beta2, mu) in (r, theta).

    beta1 = r' (c^2 (r^2 - cbar^2) - 3 cbar^2 (c^2 - r^2)),
    beta2 = 3 c^2 (r^2 - cbar^2) - cbar^2 (c^2 - r^2),
    mu    = beta . (1, -r') = -2 r^2 (c^2 - cbar^2) r'.
    """
    if np.any(np.asarray(r) <= 0.0):
        raise ValueError("beta_polar requires r > 0")
    c2 = sound_speed_sq(rho, gas)
    cb2 = cbar_sq(rho, rho0, gas)
    r2 = np.asarray(r, dtype=float) ** 2
    b1 = r_prime * (c2 * (r2 - cb2) - 3.0 * cb2 * (c2 - r2))
    b2 = 3.0 * c2 * (r2 - cb2) - cb2 * (c2 - r2)
    mu = -2.0 * r2 * (c2 - cb2) * r_prime
    return b1, b2, mu


def beta_cartesian(rho, rho0, xi, eta, eta_prime, gas):
    """Oblique-derivative coefficients (beta1, beta2) in (xi, eta).

    Literal transcription of the self-similar Cartesian form; eta_prime
    is d(eta)/d(xi) along the shock.
    """
    c2 = sound_speed_sq(rho, gas)
    cb2 = cbar_sq(rho, rho0, gas)
    r2 = xi * xi + eta * eta
    ep = eta_prime
    b1 = r2 * (-ep * xi + eta) * (c2 + cb2) - 2.0 * cb2 * (
        -ep * xi * (c2 + eta * eta)
        + (eta - eta * ep * ep - xi * ep) * (c2 - xi * xi)
    )
    b2 = ep * r2 * (eta - ep * xi) * (c2 + cb2) - 2.0 * cb2 * (
        (ep * eta - xi - xi * ep * ep) * (c2 - eta * eta)
        + ep * eta * (c2 + xi * xi)
    )
    return b1, b2


def shock_rhs_polar(r, rho, rho0, gas):
    """Shock slope dr/dtheta = r sqrt(r^2 - cbar^2) / cbar (>= 0)."""
    cb2 = cbar_sq(rho, rho0, gas)
    rad = np.asarray(r, dtype=float) ** 2 - cb2
    if np.any(rad < -1e-14 * cb2):
        raise RadicandError(
            f"shock_rhs_polar: r^2 - cbar^2 = {float(np.min(rad))} < 0 "
            "(shock collapsing onto the local shock speed)"
        )
    rad = np.maximum(rad, 0.0)
    out = r * np.sqrt(rad / cb2)
    return out if np.ndim(out) else float(out)


def shock_rhs_cartesian(xi, eta, rho, rho0, gas):
    """Shock slope d(eta)/d(xi) = (xi eta + cbar sqrt(r^2-cbar^2)) / (xi^2-cbar^2)."""
    cb2 = cbar_sq(rho, rho0, gas)
    r2 = xi * xi + eta * eta
    rad = r2 - cb2
    if np.any(np.asarray(rad) < -1e-14 * cb2):
        raise RadicandError("shock_rhs_cartesian: negative radicand r^2 - cbar^2")
    rad = np.maximum(rad, 0.0)
    denom = xi * xi - cb2
    if np.any(np.abs(np.asarray(denom)) < 1e-14 * cb2):
        raise PoleError("shock_rhs_cartesian: xi^2 = cbar^2 pole")
    out = (xi * eta + np.sqrt(cb2 * rad)) / denom
    return out if np.ndim(out) else float(out)


def df_dcbar2_forms(xi, eta, cb2):
    """Both closed forms of the sensitivity of the Cartesian shock slope
    to cbar^2, evaluated at an admissible point (r^2 > cbar^2, off the
    pole).  Returns (raw_form, factored_form); they agree identically and
    are positive, which is what makes the shock trace convex.
    """
    r2 = xi * xi + eta * eta
    rad = r2 - cb2
    if np.any(np.asarray(rad) <= 0.0):
        raise RadicandError("df_dcbar2_forms: need r^2 > cbar^2")
    cb = np.sqrt(cb2)
    s = np.sqrt(rad)
    denom = cb * (xi * eta - cb * s) ** 2 * s
    raw = (-2.0 * xi * eta * cb * s + 2.0 * eta * eta * rad + r2 * (cb2 - eta * eta)) / denom
    factored = (xi * cb - eta * s) ** 2 / denom
    return raw, factored
