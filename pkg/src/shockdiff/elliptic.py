"""Regularized fixed-boundary density solve on the mapped grid.

The density equation is written in the r-weighted divergence form

  r Q rho = ( r (zeta(c^2 - r^2) + eps) rho_r )_r + K rho_r
            + ( ((c^2 + eps)/r) rho_theta )_theta,

where zeta is a C^2 cutoff (identity for positive arguments, floor at
-eps/2) keeping the operator uniformly elliptic during iteration, and
the first-order coefficient K is either c^2 - zeta(c^2 - r^2)
(form "plain", the default) or r^2 (form "cutoff"); the two coincide
wherever the cutoff is inactive.

Discretization: cell-centered finite volumes in the computational
coordinates (sigma, t).  With r = sigma R(t) the weighted operator is an
exact divergence,

  R r Q = d/dsigma G^sigma + d/dt G^t + K rho_sigma,
  G^sigma = sigma (A + (R'/R)^2 (c^2+eps)) rho_sigma
            - (R'/R) (c^2+eps) rho_t,
  G^t     = ((c^2+eps)/sigma) rho_t - (c^2+eps) (R'/R) rho_sigma,

with A = zeta(c^2 - r^2) + eps.  The cross-derivative pieces are lagged
at the previous Picard iterate, which leaves a 5-point implicit stencil;
the converged solution satisfies the full scheme.  Every flux carries a
factor sigma, so G^sigma vanishes identically at the degenerate origin
edge.

Boundary closures: Dirichlet faces use a second-order one-sided
gradient; slip faces impose the exact conormal flux
G^t = ((c^2+eps)/sigma) rho_theta (zero in the physical problem); the
diffracted shock carries one face unknown per column with the oblique
row mu rho_r + beta2 drho/dt|_shock = 0, replaced by the pointwise
Dirichlet value rho_bar at the wedge foot.
"""

from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy.sparse import coo_matrix, csr_matrix
from scipy.sparse.linalg import spsolve

from .errors import ConvergenceError
from .mesh import DensityField
from .physics import beta_polar, sound_speed_sq

FIRST_ORDER_FORMS = ("plain", "cutoff")


@dataclass(frozen=True)
class RegularizationState:
    """Current regularization parameters: eps for ellipticity, delta for
    the shock foot offset above the inner sonic circle."""

    eps: float
    delta: float

    def __post_init__(self):
        if self.eps < 0.0 or self.delta <= 0.0:
            raise ValueError(f"need eps >= 0 and delta > 0, got {self}")


@dataclass
class EllipticSolveReport:
    iterations: int
    converged: bool
    final_update: float
    rho_min: float
    rho_max: float
    ellipticity_margin: float   # min over cells of c^2(rho) - r^2
    cutoff_active_fraction: float
    history: list = dc_field(default_factory=list)


def cutoff(s, eps):
    """C^2 monotone cutoff: s for s >= 0, -eps/2 for s <= -eps, a
    quartic blend (the degenerate member of the quintic two-point
    Hermite family) in between; |cutoff'| <= 1 everywhere."""
    s = np.asarray(s, dtype=float)
    if eps <= 0.0:
        out = np.maximum(s, 0.0)
    else:
        t = np.clip((s + eps) / eps, 0.0, 1.0)
        blend = eps * (-0.5 + t**3 - 0.5 * t**4)
        out = np.where(s >= 0.0, s, np.where(s <= -eps, -0.5 * eps, blend))
    return out if out.ndim else float(out)


def _c2(rho, gas):
    return np.asarray(rho, dtype=float) ** (gas.gamma - 1.0)


def _first_order_coef(c2, r_sq, eps, form):
    if form == "plain":
        return c2 - cutoff(c2 - r_sq, eps)
    if form == "cutoff":
        return r_sq
    raise ValueError(f"unknown first-order form {form!r}")


class _Accumulator:
    """COO triplet accumulator for the sparse system."""

    def __init__(self, n):
        self.n = n
        self.rows = []
        self.cols = []
        self.vals = []
        self.rhs = np.zeros(n)

    def add(self, rows, cols, vals):
        self.rows.append(np.ravel(np.broadcast_to(rows, np.shape(vals))))
        self.cols.append(np.ravel(np.broadcast_to(cols, np.shape(vals))))
        self.vals.append(np.ravel(np.asarray(vals, dtype=float)))

    def matrix(self):
        a = coo_matrix(
            (np.concatenate(self.vals),
             (np.concatenate(self.rows), np.concatenate(self.cols))),
            shape=(self.n, self.n),
        )
        return csr_matrix(a)


def assemble(grid, w, reg, *, mode="physical", w_faces=None, rho_bar=None,
             dirichlet=None, neumann_lo=None, neumann_hi=None,
             rhs_cells=None, first_order_form="plain"):
    """Linear system for the density with coefficients frozen at w.

    mode "physical": sonic Dirichlet rho1, oblique shock faces with one
    unknown per shock column (Dirichlet rho_bar at the foot), slip on
    the wedge and wall rays.

    mode "dirichlet": Dirichlet data `dirichlet` (per t-column) on the
    whole outer edge, conormal data `neumann_lo/hi` (rho_theta per
    sigma-cell) on the rays, volumetric right side `rhs_cells`
    (pre-integrated per cell).  Used for manufactured-solution checks.
    """
    if first_order_form not in FIRST_ORDER_FORMS:
        raise ValueError(f"first_order_form must be one of {FIRST_ORDER_FORMS}")
    gas = grid.geom.gas
    eps = reg.eps
    nt, ns = grid.shape
    tc = grid.theta_centers
    sc = grid.sigma_centers
    se = grid.sigma_edges
    ds = grid.d_sigma
    dt = np.diff(grid.theta_edges)           # (nt,)
    Rc = grid.outer_radius_at(tc)
    Rpc = grid.outer_slope_at(tc)
    slope_ratio = Rpc / Rc
    te = grid.theta_edges
    # R' at interior t-edges; single-valued at the shock/sonic junction
    Rpf = np.zeros(nt + 1)
    for k in range(1, nt):
        if k < grid.n_lower:
            Rpf[k] = grid.shock.slope_at(te[k])
        elif k == grid.n_lower:
            Rpf[k] = 0.5 * grid.shock.slope_at(te[k])
    Rf = grid.outer_radius_at(te)

    n_cells = nt * ns
    n_faces = grid.n_lower if mode == "physical" else 0
    acc = _Accumulator(n_cells + n_faces)
    idx = np.arange(n_cells).reshape(nt, ns)

    # coefficients only ever see densities bounded away from zero, so a
    # transient Picard undershoot cannot produce fractional powers of a
    # negative number
    wc = np.clip(np.asarray(w, dtype=float), 0.5 * gas.rho0, None)
    c2w = _c2(wc, gas)
    # lagged derivative fields of the previous iterate
    wt = np.gradient(w, tc, axis=0, edge_order=2)
    wsig = np.gradient(w, sc, axis=1, edge_order=2)

    if mode == "physical":
        rho_b_col = None
        u_ext = np.concatenate([w_faces, [gas.rho1]])
        t_ext = np.concatenate([tc[:n_faces], [grid.geom.theta1]])
        dudt = np.gradient(u_ext, t_ext, edge_order=2)[:n_faces]
        dtop = None
    else:
        rho_b_col = np.asarray(dirichlet, dtype=float)
        dtop = np.gradient(rho_b_col, tc, edge_order=2)

    # ---- interior sigma-faces ------------------------------------------
    c2f = _c2(0.5 * (wc[:, :-1] + wc[:, 1:]), gas)        # (nt, ns-1)
    sf = se[1:-1]
    rf2 = (Rc[:, None] * sf) ** 2
    Af = cutoff(c2f - rf2, eps) + eps
    coef = sf * (Af + (slope_ratio**2)[:, None] * (c2f + eps)) / ds
    wt_f = 0.5 * (wt[:, :-1] + wt[:, 1:])
    g_lag = -slope_ratio[:, None] * (c2f + eps) * wt_f
    scale = coef * dt[:, None]
    lo, hi = idx[:, :-1], idx[:, 1:]
    acc.add(lo, hi, scale)
    acc.add(lo, lo, -scale)
    acc.add(hi, hi, -scale)
    acc.add(hi, lo, scale)
    lag = g_lag * dt[:, None]
    np.subtract.at(acc.rhs, lo.ravel(), lag.ravel())
    np.add.at(acc.rhs, hi.ravel(), lag.ravel())

    # ---- top sigma-face (sigma = 1) ------------------------------------
    rows_top = idx[:, ns - 1]
    if mode == "physical":
        dir_cols = np.arange(n_faces, nt)
        shock_cols = np.arange(0, n_faces)
    else:
        dir_cols = np.arange(nt)
        shock_cols = np.arange(0)

    if len(dir_cols):
        i = dir_cols
        rho_b = (np.full(len(i), gas.rho1) if mode == "physical"
                 else rho_b_col[i])
        c2b = _c2(rho_b, gas)
        Ab = cutoff(c2b - Rc[i] ** 2, eps) + eps
        cA = Ab + slope_ratio[i] ** 2 * (c2b + eps)
        # gradient at the face: (8 rho_b - 9 rho_c + rho_cc) / (3 ds)
        s9 = cA * dt[i] * (-9.0) / (3.0 * ds)
        s1 = cA * dt[i] * (1.0) / (3.0 * ds)
        acc.add(rows_top[i], idx[i, ns - 1], s9)
        acc.add(rows_top[i], idx[i, ns - 2], s1)
        acc.rhs[rows_top[i]] -= cA * dt[i] * 8.0 * rho_b / (3.0 * ds)
        if mode != "physical":
            g_lag_top = -slope_ratio[i] * (c2b + eps) * dtop[i]
            acc.rhs[rows_top[i]] -= g_lag_top * dt[i]

    if len(shock_cols):
        i = shock_cols
        ucol = n_cells + i
        c2b = _c2(np.clip(w_faces[i], 0.5 * gas.rho0, None), gas)
        Ab = cutoff(c2b - Rc[i] ** 2, eps) + eps
        cB = (Ab + slope_ratio[i] ** 2 * (c2b + eps)) / (0.5 * ds)
        acc.add(rows_top[i], ucol, cB * dt[i])
        acc.add(rows_top[i], idx[i, ns - 1], -cB * dt[i])
        g_lag_top = -slope_ratio[i] * (c2b + eps) * dudt[i]
        acc.rhs[rows_top[i]] -= g_lag_top * dt[i]

    # ---- interior t-faces ----------------------------------------------
    c2t = _c2(0.5 * (wc[:-1, :] + wc[1:, :]), gas)        # (nt-1, ns)
    dtc = (tc[1:] - tc[:-1])[:, None]
    coefT = (c2t + eps) / sc[None, :] / dtc
    wsig_f = 0.5 * (wsig[:-1, :] + wsig[1:, :])
    ratio_f = (Rpf[1:nt] / Rf[1:nt])[:, None]
    g_lagT = -(c2t + eps) * ratio_f * wsig_f
    lo, hi = idx[:-1, :], idx[1:, :]
    scaleT = coefT * ds
    acc.add(lo, hi, scaleT)
    acc.add(lo, lo, -scaleT)
    acc.add(hi, hi, -scaleT)
    acc.add(hi, lo, scaleT)
    lagT = g_lagT * ds
    np.subtract.at(acc.rhs, lo.ravel(), lagT.ravel())
    np.add.at(acc.rhs, hi.ravel(), lagT.ravel())

    # ---- boundary t-faces (wedge and wall rays) -------------------------
    if mode != "physical":
        if neumann_lo is not None:
            w_lo = np.clip(1.5 * wc[0, :] - 0.5 * wc[1, :], 0.5 * gas.rho0, None)
            g = (_c2(w_lo, gas) + eps) / sc * np.asarray(neumann_lo, dtype=float)
            acc.rhs[idx[0, :]] += g * ds
        if neumann_hi is not None:
            w_hi = np.clip(1.5 * wc[-1, :] - 0.5 * wc[-2, :], 0.5 * gas.rho0, None)
            g = (_c2(w_hi, gas) + eps) / sc * np.asarray(neumann_hi, dtype=float)
            acc.rhs[idx[-1, :]] -= g * ds

    # ---- first-order source K rho_sigma ---------------------------------
    r_sq = (Rc[:, None] * sc) ** 2
    K = _first_order_coef(c2w, r_sq, eps, first_order_form)
    kd = K * dt[:, None]
    # interior faces contribute averaged values
    j = np.arange(1, ns - 1)
    acc.add(idx[:, j], idx[:, j + 1], 0.5 * kd[:, j])
    acc.add(idx[:, j], idx[:, j - 1], -0.5 * kd[:, j])
    # bottom cell: face value at sigma = 0 extrapolated constant
    acc.add(idx[:, 0], idx[:, 1], 0.5 * kd[:, 0])
    acc.add(idx[:, 0], idx[:, 0], -0.5 * kd[:, 0])
    # top cell: lower face averaged, upper face is the boundary value
    jt = ns - 1
    acc.add(idx[:, jt], idx[:, jt], -0.5 * kd[:, jt])
    acc.add(idx[:, jt], idx[:, jt - 1], -0.5 * kd[:, jt])
    if len(dir_cols):
        i = dir_cols
        rho_b = (np.full(len(i), gas.rho1) if mode == "physical"
                 else rho_b_col[i])
        acc.rhs[idx[i, jt]] -= kd[i, jt] * rho_b
    if len(shock_cols):
        i = shock_cols
        acc.add(idx[i, jt], n_cells + i, kd[i, jt])

    # ---- volumetric right side ------------------------------------------
    if rhs_cells is not None:
        acc.rhs += np.asarray(rhs_cells, dtype=float).ravel()

    # ---- oblique rows for the shock face unknowns -----------------------
    if mode == "physical":
        half = 0.5 * ds
        for i in range(n_faces):
            row = n_cells + i
            if i == 0:
                acc.add(row, row, 1.0)
                acc.rhs[row] = rho_bar
                continue
            rp = grid.shock.slope_at(tc[i])
            b1, b2, mu = beta_polar(max(float(w_faces[i]), gas.rho0),
                                    gas.rho0, Rc[i], rp, gas)
            # mu * rho_r + beta2 * d/dt rho(R(t), t) = 0
            c_r = mu / (half * Rc[i])
            acc.add(row, row, c_r)
            acc.add(row, idx[i, ns - 1], -c_r)
            if b2 >= 0.0:
                if i + 1 < n_faces:
                    step = tc[i + 1] - tc[i]
                    acc.add(row, n_cells + i + 1, b2 / step)
                    acc.add(row, row, -b2 / step)
                else:
                    step = grid.geom.theta1 - tc[i]
                    acc.add(row, row, -b2 / step)
                    acc.rhs[row] -= b2 * gas.rho1 / step
            else:
                step = tc[i] - tc[i - 1]
                acc.add(row, row, b2 / step)
                acc.add(row, n_cells + i - 1, -b2 / step)

    return acc.matrix(), acc.rhs


def _report(grid, rho, reg, iterations, converged, final_update, history):
    gas = grid.geom.gas
    c2 = _c2(rho, gas)
    r_sq = (grid.outer_radius_at(grid.theta_centers)[:, None]
            * grid.sigma_centers) ** 2
    margin = c2 - r_sq
    return EllipticSolveReport(
        iterations=iterations,
        converged=converged,
        final_update=final_update,
        rho_min=float(np.min(rho)),
        rho_max=float(np.max(rho)),
        ellipticity_margin=float(np.min(margin)),
        cutoff_active_fraction=float(np.mean(margin < 0.0)),
        history=history,
    )


def solve_fixed_boundary(grid, reg, rho_bar, w0, w0_faces=None, *,
                         omega=0.5, tol_nl=None, max_iters=200,
                         first_order_form="plain", raise_on_fail=True):
    """Damped Picard iteration for the nonlinear fixed-boundary problem.

    Returns (DensityField, face_values, EllipticSolveReport).  The face
    values are the shock-trace densities carried by the oblique rows.
    """
    gas = grid.geom.gas
    nt, ns = grid.shape
    if tol_nl is None:
        tol_nl = 1e-8 * gas.rho1
    w = np.array(w0.rho if isinstance(w0, DensityField) else w0, dtype=float)
    if w0_faces is None:
        wf = w[: grid.n_lower, ns - 1].copy()
        wf[0] = rho_bar
    else:
        wf = np.array(w0_faces, dtype=float)

    history = []
    converged = False
    update = np.inf
    it = 0
    for it in range(1, max_iters + 1):
        A, b = assemble(grid, w, reg, mode="physical", w_faces=wf,
                        rho_bar=rho_bar, first_order_form=first_order_form)
        x = spsolve(A, b)
        rho_new = x[: nt * ns].reshape(nt, ns)
        uf_new = x[nt * ns:]
        update = max(
            float(np.max(np.abs(rho_new - w))),
            float(np.max(np.abs(uf_new - wf))) if len(wf) else 0.0,
        )
        history.append(update)
        w = w + omega * (rho_new - w)
        wf = wf + omega * (uf_new - wf)
        if update < tol_nl:
            converged = True
            break
        # a flat update history means a limit cycle of the lagged
        # coefficients (typically the upwind side of the oblique rows
        # flipping); more damping breaks the cycle
        if it >= 3 and omega > 0.06 and history[-1] > 0.9 * history[-3]:
            omega *= 0.5
    if not converged and raise_on_fail:
        raise ConvergenceError(
            f"fixed-boundary Picard stalled at update {update:.3e} "
            f"after {it} iterations (tol {tol_nl:.3e})",
            history=history,
        )
    report = _report(grid, w, reg, it, converged, update, history)
    return DensityField(grid=grid, rho=w), wf, report


def solve_dirichlet_linear(grid, reg, w, dirichlet, *, neumann_lo=None,
                           neumann_hi=None, rhs_cells=None,
                           first_order_form="plain", passes=8, tol=1e-12):
    """Linear solve with coefficients frozen at w and Dirichlet data on
    the whole outer edge; the lagged cross fluxes are relaxed to their
    self-consistent values by a few fixed-coefficient passes.  Used by
    the manufactured-solution accuracy checks.
    """
    rho = np.array(w, dtype=float)
    prev = None
    for _ in range(passes):
        A, b = assemble(grid, rho, reg, mode="dirichlet", dirichlet=dirichlet,
                        neumann_lo=neumann_lo, neumann_hi=neumann_hi,
                        rhs_cells=rhs_cells, first_order_form=first_order_form)
        x = spsolve(A, b).reshape(grid.shape)
        if prev is not None and np.max(np.abs(x - prev)) < tol * np.max(np.abs(x)):
            prev = x
            break
        prev = x
        rho = x
    return DensityField(grid=grid, rho=prev)
