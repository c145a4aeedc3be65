"""Fixed geometric data of the diffraction configuration.

From (gamma, rho0, rho1, theta_w) we get the incident shock abscissa
xi1 = cbar(rho1, rho0), the sonic radii r1 = c(rho1) and c0 = c(rho0),
the corner P1 where the incident shock meets the state-(1) sonic circle,
and the outer-radius function R(theta) describing the subsonic domain:
the free shock for theta in [theta_w, theta1], the sonic arc r = r1 for
theta in [theta1, pi].
"""

from dataclasses import dataclass

import numpy as np

from .physics import GasModel, cbar_sq


@dataclass(frozen=True)
class WedgeSetup:
    gas: GasModel
    theta_w: float  # wedge angle, radians, in (-pi, 0)

    def __post_init__(self):
        if not -np.pi < self.theta_w < 0.0:
            raise ValueError(f"theta_w must lie in (-pi, 0), got {self.theta_w}")


@dataclass(frozen=True)
class DerivedGeometry:
    setup: WedgeSetup
    xi1: float      # incident shock abscissa
    r1: float       # state-(1) sonic radius c(rho1)
    c0: float       # state-(0) sonic radius c(rho0)
    eta1: float     # ordinate of P1
    theta1: float   # polar angle of P1

    @property
    def theta_w(self):
        return self.setup.theta_w

    @property
    def gas(self):
        return self.setup.gas

    @property
    def P1(self):
        return (self.xi1, self.eta1)

    @property
    def P3(self):
        return (-self.r1, 0.0)  # polar (r1, pi)

    @property
    def O(self):
        return (0.0, 0.0)


def derive_geometry(setup):
    """All derived constants of the configuration.

    xi1^2 = cbar^2(rho1, rho0) < r1^2 = c^2(rho1), so P1 sits strictly
    above the xi-axis and theta1 = atan2(eta1, xi1) is in (0, pi/2).
    """
    gas = setup.gas
    xi1_sq = float(cbar_sq(gas.rho1, gas.rho0, gas))
    r1 = gas.c1
    if xi1_sq >= r1 * r1:
        raise ValueError("degenerate configuration: incident shock misses the sonic circle")
    xi1 = float(np.sqrt(xi1_sq))
    eta1 = float(np.sqrt(r1 * r1 - xi1_sq))
    theta1 = float(np.arctan2(eta1, xi1))
    return DerivedGeometry(
        setup=setup, xi1=xi1, r1=r1, c0=gas.c0, eta1=eta1, theta1=theta1
    )


def outer_radius(theta, shock, geom):
    """Outer boundary radius R(theta) of the subsonic domain.

    R follows the shock curve below theta1 and the sonic arc r = r1
    above; continuity at theta1 is the K1 matching condition.
    """
    theta = np.asarray(theta, dtype=float)
    lo, hi = geom.theta_w, np.pi
    if np.any(theta < lo - 1e-12) or np.any(theta > hi + 1e-12):
        raise ValueError("outer_radius: theta outside [theta_w, pi]")
    on_shock = theta < geom.theta1
    out = np.where(on_shock, shock.radius_at(np.clip(theta, lo, geom.theta1)), geom.r1)
    return out if out.ndim else float(out)
