"""Corrector stage: fluxes, positivity blending, oscillation control, full step.

Update structure per step (nu = dt/dx):

  means:      Q1^{n+1} = Q^LxF - nu*(theta_r*dF_r - theta_l*dF_l),
              Q^LxF the first-order Rusanov update of the cell means,
              dF = F^{n+1/2} - F^LxF the high-order flux correction,
              theta per face from the positivity blender (1 = fully high order)
  high modes: volume term from the predicted space-time polynomial plus
              unblended time-averaged face fluxes

followed by the characteristic oscillation limiter and the pointwise
positivity rescaling.  All loops over elements/faces are vectorized; face j
sits between elements j-1 and j, so element i owns faces i (left) and i+1
(right).
"""

from dataclasses import dataclass

import numpy as np

from . import models
from .basis import basis_tables
from .errors import PositivityError, SolverError
from .mesh_state import BoundaryCondition, SolutionCoefficients, extend_with_ghosts
from .predictor import positivity_aim, predict

_TINY = 1e-300   # mask-protected denominators only


@dataclass(frozen=True)
class LimiterToggles:
    """Independent switches for the four limiting stages."""

    prediction: bool = True    # space-time positivity rescaling inside Picard
    mean_flux: bool = True     # positivity-in-the-mean flux blending
    pointwise: bool = True     # pointwise positivity rescaling of the new state
    oscillation: bool = True   # characteristic hierarchical minmod

    @classmethod
    def none(cls):
        return cls(False, False, False, False)


@dataclass(frozen=True)
class StepStats:
    """Diagnostics for one accepted step."""

    dt: float
    n_prediction_limited: int
    n_blended_faces: int
    n_pointwise_density: int
    n_pointwise_pressure: int
    n_oscillation_limited: int
    min_mean_positivity: np.ndarray    # (n_pos,) minima over elements
    min_point_positivity: np.ndarray   # (n_pos,) minima over control points


# ----------------------------------------------------------------- fluxes


def _rusanov_from_primitive(sys, w_left, w_right):
    f_l = models.flux_from_primitive(sys, w_left)
    f_r = models.flux_from_primitive(sys, w_right)
    lam = np.maximum(
        models.spectral_radius_from_primitive(sys, w_left),
        models.spectral_radius_from_primitive(sys, w_right),
    )
    q_l = models.prim_to_cons(sys, w_left)
    q_r = models.prim_to_cons(sys, w_right)
    return 0.5 * (f_l + f_r) - 0.5 * lam[..., None] * (q_r - q_l)


def time_averaged_fluxes(sys, tables, w_ext):
    """Time-averaged Rusanov fluxes on all faces from ghost-extended predictions.

    Traces are taken from the primitive space-time polynomials at the shared
    face (xi=+1 of the left element, xi=-1 of the right one) on the temporal
    Gauss nodes, and the Rusanov flux is averaged with the same rule.
    """
    w_l = np.einsum("al,jle->jae", tables.psi_face[1], w_ext[:-1])
    w_r = np.einsum("al,jle->jae", tables.psi_face[0], w_ext[1:])
    f_nodes = _rusanov_from_primitive(sys, w_l, w_r)
    return 0.5 * np.einsum("a,jae->je", tables.quad.weights, f_nodes)


def time_averaged_flux(sys, w_left, w_right, order):
    """Single-face version of time_averaged_fluxes (w_* are (MP, m_eqn))."""
    tables = basis_tables(order)
    w_ext = np.stack([np.asarray(w_left, float), np.asarray(w_right, float)])
    return time_averaged_fluxes(sys, tables, w_ext)[0]


def lxf_flux(sys, q_left, q_right):
    """First-order Rusanov flux on conservative states (local max wave speed)."""
    f_l = models.flux(sys, q_left)
    f_r = models.flux(sys, q_right)
    lam = np.maximum(models.spectral_radius(sys, q_left), models.spectral_radius(sys, q_right))
    return 0.5 * (f_l + f_r) - 0.5 * lam[..., None] * (np.asarray(q_right, float) - q_left)


# ------------------------------------------------------------ flux blending


def blend_thetas(sys, q_lxf, d_flux, nu, eps, bc):
    """Per-face blending factors keeping the mean update admissible.

    An element loses mass through its left face when dF_l < 0 and through its
    right face when dF_r > 0; each dangerous face gets capped so the total
    possible loss stays within the budget (Q^LxF_1 - eps)/nu.  For Euler a
    second pass shrinks both caps along the chord from Q^LxF towards the
    candidate updates until the mean pressure of every reachable corner state
    is admissible (pressure is concave, so corner control suffices).
    """
    m = q_lxf.shape[0]
    theta = np.ones(m + 1)
    if not sys.positivity_indices:
        return theta
    df_l = d_flux[:-1, 0]
    df_r = d_flux[1:, 0]
    q1 = q_lxf[:, 0]
    aim = positivity_aim(eps, scale=np.abs(q1) + nu * (np.abs(df_l) + np.abs(df_r)))
    gamma_budget = np.maximum(q1 - aim, 0.0) / nu
    lam_l = np.ones(m)
    lam_r = np.ones(m)
    both = (df_l < 0.0) & (df_r > 0.0)
    only_l = (df_l < 0.0) & ~both
    only_r = (df_r > 0.0) & ~both
    cap_both = np.minimum(1.0, gamma_budget / np.maximum(np.abs(df_l) + np.abs(df_r), _TINY))
    cap_l = np.minimum(1.0, gamma_budget / np.maximum(np.abs(df_l), _TINY))
    cap_r = np.minimum(1.0, gamma_budget / np.maximum(np.abs(df_r), _TINY))
    lam_l[both] = cap_both[both]
    lam_r[both] = cap_both[both]
    lam_l[only_l] = cap_l[only_l]
    lam_r[only_r] = cap_r[only_r]

    if sys.name == "euler":
        gamma, = sys.params
        dfl = d_flux[:-1, :]
        dfr = d_flux[1:, :]
        cand_11 = q_lxf - nu * (lam_r[:, None] * dfr - lam_l[:, None] * dfl)
        cand_10 = q_lxf + nu * lam_l[:, None] * dfl
        cand_01 = q_lxf - nu * lam_r[:, None] * dfr
        p_base = models.pointwise_positivity_values(sys, q_lxf)[:, 1]
        rho_safe = np.maximum(np.abs(q_lxf[:, 0]), models.DIV_FLOOR)
        u_base = q_lxf[:, 1] / rho_safe
        kin = 0.5 * q_lxf[:, 1] ** 2 / rho_safe
        # aim scale covers the pressure magnitude over the whole reachable
        # candidate set (first-order variation), so rounding noise at any
        # realized corner state stays inside the safety margin
        spread = nu * (np.abs(dfl) + np.abs(dfr))
        p_span = (np.abs(q_lxf[:, 2]) + kin + spread[:, 2]
                  + np.abs(u_base) * spread[:, 1] + 0.5 * u_base ** 2 * spread[:, 0])
        aim_p = positivity_aim(eps, scale=(gamma - 1.0) * p_span)
        mu = np.ones(m)
        for cand in (cand_11, cand_10, cand_01):
            p_c = models.pointwise_positivity_values(sys, cand)[:, 1]
            need = p_c < aim_p
            denom = p_base - p_c
            ratio = np.where(denom > 0.0, (p_base - aim_p) / np.where(denom > 0.0, denom, 1.0), 0.0)
            mu = np.minimum(mu, np.where(need, np.clip(ratio, 0.0, 1.0), 1.0))
        mu = np.where(p_base < aim_p, 0.0, mu)
        lam_l *= mu
        lam_r *= mu

    np.minimum(theta[:-1], lam_l, out=theta[:-1])
    np.minimum(theta[1:], lam_r, out=theta[1:])
    if bc is BoundaryCondition.PERIODIC:
        # first and last faces are the same physical face
        merged = min(theta[0], theta[-1])
        theta[0] = merged
        theta[-1] = merged
    return theta


def update_means(q_lxf, d_flux, theta, nu):
    """Blended mean update; theta = 0 falls back to the low-order means bitwise."""
    return q_lxf - nu * (theta[1:, None] * d_flux[1:] - theta[:-1, None] * d_flux[:-1])


def update_high_modes(sys, tables, q_old, w_int, f_high, nu):
    """Unblended update of modes 2..MC from the predicted space-time polynomial."""
    wq = tables.quad.weights
    alpha = np.einsum("abl,ile->iabe", tables.psi_q, w_int)
    f_vol = models.flux_from_primitive(sys, alpha)
    # spatial node index pairs with the test-function derivative
    vol = 0.5 * np.einsum("a,b,bk,iabe->ike", wq, wq, tables.dphi_q, f_vol)
    edge = tables.phi_edge
    surf = (edge[1][None, :, None] * f_high[1:, None, :]
            - edge[0][None, :, None] * f_high[:-1, None, :])
    return q_old[:, 1:, :] + nu * (vol[:, 1:, :] - surf[:, 1:, :])


# --------------------------------------------------- pointwise positivity


def zhang_shu_limit(sys, tables, q, eps):
    """Rescale modes 2..MC so control-point values of the positivity quantities
    stay >= eps: first the leading conservative component, then (Euler) the
    pressure.  Returns (limited q, n_leading, n_pressure)."""
    if not sys.positivity_indices:
        return q, 0, 0
    lead_name = sys.prim_names[0]
    means0 = q[:, 0, 0]
    if np.any(means0 < eps):
        i = int(np.argmin(means0))
        raise PositivityError(
            f"mean {lead_name}={means0[i]:.6g} on element {i} is below eps={eps:g}"
        )
    vals = np.einsum("pk,ik->ip", tables.phi_pos, q[:, :, 0])
    vmin = vals.min(axis=1)
    aim = positivity_aim(eps, scale=means0)
    denom = means0 - vmin
    ratio = np.where(denom > 0.0, (means0 - aim) / np.where(denom > 0.0, denom, 1.0), 1.0)
    theta = np.clip(ratio, 0.0, 1.0)
    mask1 = theta < 1.0
    n1 = int(mask1.sum())
    if n1:
        q = q.copy()
        q[mask1, 1:, :] *= theta[mask1, None, None]
    n2 = 0
    if sys.name == "euler":
        gamma, = sys.params
        q_mean = q[:, 0, :]
        p_bar = models.pointwise_positivity_values(sys, q_mean)[:, 1]
        if np.any(p_bar < eps):
            i = int(np.argmin(p_bar))
            raise PositivityError(
                f"mean pressure {p_bar[i]:.6g} on element {i} is below eps={eps:g}"
            )
        q_pts = np.einsum("pk,ike->ipe", tables.phi_pos, q)
        p_pts = models.pointwise_positivity_values(sys, q_pts)[..., 1]
        p_min = p_pts.min(axis=1)
        rho_safe = np.maximum(np.abs(q_mean[:, 0]), models.DIV_FLOOR)
        kin = 0.5 * q_mean[:, 1] ** 2 / rho_safe
        aim_p = positivity_aim(eps, scale=(gamma - 1.0) * (np.abs(q_mean[:, 2]) + kin))
        denom2 = p_bar - p_min
        ratio2 = np.where(denom2 > 0.0, (p_bar - aim_p) / np.where(denom2 > 0.0, denom2, 1.0), 1.0)
        theta2 = np.clip(ratio2, 0.0, 1.0)
        mask2 = theta2 < 1.0
        n2 = int(mask2.sum())
        if n2:
            if not n1:
                q = q.copy()
            q[mask2, 1:, :] *= theta2[mask2, None, None]
    return q, n1, n2


# ------------------------------------------------------ oscillation limiter


def minmod3(a, b, c):
    """Zero unless all arguments share a strict sign; else the one of smallest
    magnitude, signed like the first argument."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    c = np.asarray(c, dtype=float)
    products = np.minimum(np.minimum(a * b, b * c), a * c)
    mag = np.minimum(np.minimum(np.abs(a), np.abs(b)), np.abs(c))
    out = np.where(products <= 0.0, 0.0, np.sign(a) * mag)
    if out.ndim == 0:
        return float(out)
    return out


def krivodonova_limit(sys, q_ext, osc_eps):
    """Characteristic hierarchical minmod limiter on a ghost-extended state.

    Works top mode down: mode k+1 is compared against scaled neighbor
    differences of mode k in local characteristic variables; limiting continues
    to the next lower mode only while a mode actually changed (or is
    negligible).  Elements whose characteristic modes never change are returned
    bitwise untouched.  Returns (limited interior state, count of elements
    changed by more than osc_eps).
    """
    mc = q_ext.shape[1]
    q_int = q_ext[1:-1]
    if mc < 2:
        return q_int.copy(), 0
    means = q_int[:, 0, :]
    lhat = models.left_eigenvectors(sys, means)
    rhat = models.right_eigenvectors(sys, means)
    char = np.einsum("ims,iks->ikm", lhat, q_int[:, 1:, :])
    diff_m = np.einsum("ims,iks->ikm", lhat, q_int[:, :-1, :] - q_ext[:-2, :-1, :])
    diff_p = np.einsum("ims,iks->ikm", lhat, q_ext[2:, :-1, :] - q_int[:, :-1, :])
    char_orig = char.copy()
    active = np.ones(means.shape, dtype=bool)   # (m_elem, m_eqn)
    for k in range(mc - 1, 0, -1):
        fac = np.sqrt((2.0 * k - 1.0) / (2.0 * k + 1.0))
        row = char[:, k - 1, :]
        cand = minmod3(row, fac * diff_p[:, k - 1, :], fac * diff_m[:, k - 1, :])
        new_row = np.where(active, cand, row)
        changed = np.abs(new_row - row) > osc_eps
        small = np.abs(new_row) <= osc_eps
        char[:, k - 1, :] = new_row
        active = active & (changed | small)
    touched = np.any(char != char_orig, axis=(1, 2))
    significant = np.any(np.abs(char - char_orig) > osc_eps, axis=(1, 2))
    out = q_int.copy()
    if np.any(touched):
        out[touched, 1:, :] = np.einsum("ism,ikm->iks", rhat[touched], char[touched])
    return out, int(significant.sum())


# -------------------------------------------------------------- full step


def source_modal_integral(tables, mesh, t_n, dt, source):
    """Space-time quadrature of a forcing term against the spatial modes."""
    mu, wq = tables.quad.nodes, tables.quad.weights
    t_nodes = t_n + 0.5 * dt * (1.0 + mu)
    x_nodes = mesh.nodes(mu)
    s_vals = np.asarray(source(t_nodes[None, :, None], x_nodes[:, None, :]), dtype=float)
    return 0.25 * dt * np.einsum("a,b,bk,iabe->ike", wq, wq, tables.phi_q, s_vals)


def step(op, sys, state, mesh, bc, ctx, eps, toggles, *, source=None, osc_eps=None):
    """Advance one step of size ctx.dt; returns (new state, StepStats)."""
    if ctx.dt <= 0.0 or ctx.nu <= 0.0:
        raise SolverError(f"step needs a positive dt (got {ctx.dt!r})")
    tables = op.tables
    nu = ctx.nu
    q = state.q
    w_int, pred_mask = predict(
        op, sys, q, nu, eps, limit=toggles.prediction,
        t_n=state.t, dt=ctx.dt, x_centers=mesh.centers(), dx=mesh.dx, source=source,
    )
    w_ext = extend_with_ghosts(w_int, bc)
    f_high = time_averaged_fluxes(sys, tables, w_ext)
    means_ext = extend_with_ghosts(q[:, 0, :], bc)
    f_lxf = lxf_flux(sys, means_ext[:-1], means_ext[1:])
    d_flux = f_high - f_lxf
    q_lxf = q[:, 0, :] - nu * (f_lxf[1:] - f_lxf[:-1])
    src_modal = None
    if source is not None:
        src_modal = source_modal_integral(tables, mesh, state.t, ctx.dt, source)
        q_lxf = q_lxf + src_modal[:, 0, :]
    if toggles.mean_flux:
        theta = blend_thetas(sys, q_lxf, d_flux, nu, eps, bc)
    else:
        theta = np.ones(state.m_elem + 1)
    means_new = update_means(q_lxf, d_flux, theta, nu)
    high_new = update_high_modes(sys, tables, q, w_int, f_high, nu)
    if src_modal is not None:
        high_new = high_new + src_modal[:, 1:, :]
    q_new = np.concatenate([means_new[:, None, :], high_new], axis=1)
    n_osc = 0
    if toggles.oscillation and state.order > 1:
        q_new, n_osc = krivodonova_limit(
            sys, extend_with_ghosts(q_new, bc), eps if osc_eps is None else osc_eps
        )
    n_zs1 = n_zs2 = 0
    if toggles.pointwise:
        q_new, n_zs1, n_zs2 = zhang_shu_limit(sys, tables, q_new, eps)
    new_state = SolutionCoefficients(q_new, state.t + ctx.dt)
    mean_pos = models.pointwise_positivity_values(sys, q_new[:, 0, :])
    pts = np.einsum("pk,ike->ipe", tables.phi_pos, q_new)
    point_pos = models.pointwise_positivity_values(sys, pts)
    n_pos = mean_pos.shape[-1]
    stats = StepStats(
        dt=ctx.dt,
        n_prediction_limited=int(pred_mask.sum()),
        n_blended_faces=int(np.count_nonzero(theta < 1.0)) if toggles.mean_flux else 0,
        n_pointwise_density=n_zs1,
        n_pointwise_pressure=n_zs2,
        n_oscillation_limited=n_osc,
        min_mean_positivity=(mean_pos.min(axis=0) if n_pos else np.empty(0)),
        min_point_positivity=(point_pos.min(axis=(0, 1)) if n_pos else np.empty(0)),
    )
    return new_state, stats
