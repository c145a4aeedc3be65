"""Boundary-fitted grid for the subsonic region.

Computational coordinates (sigma, t) with sigma in [0, 1], t in
[theta_w, pi]; the physical point is r = sigma * R(t), theta = t, where
R is the outer radius (free shock below theta1, sonic arc r = r1 above).
The t-edges are built as two uniform blocks snapped exactly at theta1 so
the shock/sonic switch never cuts through a cell.

Cell-centered storage: rho[i, j] lives at (t_center[i], sigma_center[j]).
Boundary faces carry tags used by the elliptic assembly:

  sigma = 1, t < theta1   -> "shock"   (oblique derivative)
  sigma = 1, t > theta1   -> "sonic"   (Dirichlet rho = rho1)
  sigma = 0               -> "origin"  (degenerate, zero flux)
  t = theta_w             -> "wedge"   (slip, rho_nu = 0)
  t = pi                  -> "wall"    (slip, rho_nu = 0)
"""

from dataclasses import dataclass

import numpy as np

MIN_CELLS = 8


@dataclass(frozen=True)
class MappedGrid:
    geom: object
    shock: object
    sigma_edges: np.ndarray   # (n_sigma+1,)
    theta_edges: np.ndarray   # (n_theta+1,), contains theta1 exactly
    n_lower: int              # number of t-cells below theta1 (shock side)

    @property
    def n_sigma(self):
        return len(self.sigma_edges) - 1

    @property
    def n_theta(self):
        return len(self.theta_edges) - 1

    @property
    def shape(self):
        return (self.n_theta, self.n_sigma)

    @property
    def sigma_centers(self):
        return 0.5 * (self.sigma_edges[1:] + self.sigma_edges[:-1])

    @property
    def theta_centers(self):
        return 0.5 * (self.theta_edges[1:] + self.theta_edges[:-1])

    @property
    def d_sigma(self):
        return float(self.sigma_edges[1] - self.sigma_edges[0])

    def d_theta(self, i):
        """Cell width in t; uniform within each block."""
        return float(self.theta_edges[i + 1] - self.theta_edges[i])

    def outer_radius_at(self, t):
        t = np.asarray(t, dtype=float)
        on_shock = t < self.geom.theta1
        lo = self.geom.theta_w
        out = np.where(
            on_shock,
            self.shock.radius_at(np.clip(t, lo, self.geom.theta1)),
            self.geom.r1,
        )
        return out if out.ndim else float(out)

    def outer_slope_at(self, t):
        """dR/dt; the shock slope below theta1, zero on the sonic arc."""
        t = np.asarray(t, dtype=float)
        on_shock = t < self.geom.theta1
        lo = self.geom.theta_w
        out = np.where(
            on_shock,
            self.shock.slope_at(np.clip(t, lo, self.geom.theta1)),
            0.0,
        )
        return out if out.ndim else float(out)

    def is_shock_column(self, i):
        return i < self.n_lower

    def cell_radii(self):
        """Physical radii of cell centers, shape (n_theta, n_sigma)."""
        R = self.outer_radius_at(self.theta_centers)
        return np.outer(R, self.sigma_centers)

    def cell_volumes(self):
        """Integral of r dr dtheta over each cell (polar cell area)."""
        R = self.outer_radius_at(self.theta_centers)
        s_sq = self.sigma_edges**2
        ds2 = 0.5 * (s_sq[1:] - s_sq[:-1])
        dt = np.diff(self.theta_edges)
        return np.outer(R**2 * dt, ds2)


def build_grid(geom, shock, n_sigma, n_theta):
    """Boundary-fitted grid with n_sigma radial and n_theta angular cells.

    The angular cells are split between [theta_w, theta1] and
    [theta1, pi] in proportion to their widths, at least MIN_CELLS each.
    """
    if n_sigma < MIN_CELLS or n_theta < 2 * MIN_CELLS:
        raise ValueError(
            f"grid too coarse: need n_sigma >= {MIN_CELLS} and n_theta >= {2 * MIN_CELLS}"
        )
    span_lo = geom.theta1 - geom.theta_w
    span_hi = np.pi - geom.theta1
    n_lower = int(round(n_theta * span_lo / (span_lo + span_hi)))
    n_lower = min(max(n_lower, MIN_CELLS), n_theta - MIN_CELLS)
    lower = np.linspace(geom.theta_w, geom.theta1, n_lower + 1)
    upper = np.linspace(geom.theta1, np.pi, n_theta - n_lower + 1)
    theta_edges = np.concatenate([lower, upper[1:]])
    sigma_edges = np.linspace(0.0, 1.0, n_sigma + 1)
    return MappedGrid(
        geom=geom,
        shock=shock,
        sigma_edges=sigma_edges,
        theta_edges=theta_edges,
        n_lower=n_lower,
    )


@dataclass
class DensityField:
    """Cell-centered density on a mapped grid."""

    grid: MappedGrid
    rho: np.ndarray  # (n_theta, n_sigma)

    def __post_init__(self):
        if self.rho.shape != self.grid.shape:
            raise ValueError(
                f"rho shape {self.rho.shape} does not match grid {self.grid.shape}"
            )

    def interpolate_ct(self, sigma, t):
        """Bilinear interpolation in computational coordinates, clamped
        to the cell-center hull (constant extrapolation at boundaries)."""
        g = self.grid
        tc, sc = g.theta_centers, g.sigma_centers
        sigma = np.clip(sigma, sc[0], sc[-1])
        t = np.clip(t, tc[0], tc[-1])
        i = np.clip(np.searchsorted(tc, t) - 1, 0, len(tc) - 2)
        j = np.clip(np.searchsorted(sc, sigma) - 1, 0, len(sc) - 2)
        wt = (t - tc[i]) / (tc[i + 1] - tc[i])
        ws = (sigma - sc[j]) / (sc[j + 1] - sc[j])
        v = (
            (1 - wt) * (1 - ws) * self.rho[i, j]
            + (1 - wt) * ws * self.rho[i, j + 1]
            + wt * (1 - ws) * self.rho[i + 1, j]
            + wt * ws * self.rho[i + 1, j + 1]
        )
        return v if np.ndim(v) else float(v)

    def interpolate(self, r, theta):
        """Bilinear interpolation at a physical point (r, theta)."""
        R = self.grid.outer_radius_at(theta)
        sigma = np.clip(np.asarray(r, dtype=float) / R, 0.0, 1.0)
        return self.interpolate_ct(sigma, theta)


def constant_field(grid, value):
    return DensityField(grid=grid, rho=np.full(grid.shape, float(value)))
