"""Element-local space-time predictor.

Each element solves a small space-time Galerkin system for the primitive
variables alpha(tau, xi) over the slab [t_n, t_n + dt] x element, scaled to
[-1,1]^2.  With theta(alpha) = -nu * B(alpha) d_xi alpha (+ optional forcing),
the weak form in the orthonormal space-time basis psi reads

    L W = (1/4) iint psi theta dtau dxi + (1/4) int psi(-1, xi) alpha_A(xi) dxi,
    L   = (1/4) iint psi d_tau(psi)^T  + (1/4) int psi(-1, xi) psi(-1, xi)^T dxi,

where alpha_A is the spatial projection of the current primitive state.  The
nonlinearity is resolved by exactly `order` Picard sweeps starting from the
constant-in-time extension of alpha_A; a positivity rescaling runs after every
sweep so all control-point evaluations feeding the next sweep stay admissible.

All quadratures here are exact for the polynomial degrees involved, so the
assembled operator equals the analytic one to rounding.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import models
from .basis import basis_tables, spacetime_psi_dtau
from .errors import PositivityError, SolverError

# positivity limiters aim slightly above eps so that rounding noise in later
# point evaluations cannot drag a limited minimum back below the threshold;
# the noise is absolute (machine eps times the cell magnitude), so the aim
# carries a scale-proportional part on top of the relative one
POSITIVITY_MARGIN = 1e-3
MACHINE_SLACK = 64.0 * np.finfo(float).eps


def positivity_aim(eps, scale=0.0):
    return eps * (1.0 + POSITIVITY_MARGIN) + MACHINE_SLACK * np.abs(scale)


@dataclass(frozen=True)
class PicardOperator:
    """Per-order dense operator tables for the predictor."""

    order: int
    tables: object           # BasisTables
    lmat: np.ndarray         # (MP, MP) space-time Galerkin matrix
    psihat_q: np.ndarray     # (MO, MO, MP) L^{-T}-transformed basis at volume nodes
    tic: np.ndarray          # (MP, MC) initial-condition transfer W += tic @ A
    t0: np.ndarray           # (MP, MC) constant-in-time initial guess transfer
    wq4: np.ndarray          # (MO, MO) omega_a*omega_b/4


@lru_cache(maxsize=None)
def build_picard_operator(order):
    """Assemble L by quadrature, invert it, and precompute sweep tables."""
    t = basis_tables(order)
    mu, w = t.quad.nodes, t.quad.weights
    tg, xg = np.meshgrid(mu, mu, indexing="ij")
    dpsi_dtau = spacetime_psi_dtau(tg, xg, order)
    vol = 0.25 * np.einsum("a,b,abl,abm->lm", w, w, t.psi_q, dpsi_dtau)
    bnd = 0.25 * np.einsum("b,bl,bm->lm", w, t.psi_ic, t.psi_ic)
    lmat = vol + bnd
    cond = np.linalg.cond(lmat)
    if not np.isfinite(cond) or cond > 1e12:
        raise SolverError(f"space-time operator is numerically singular (cond={cond:.3g})")
    linv = np.linalg.inv(lmat)
    psihat_q = np.einsum("lm,abm->abl", linv, t.psi_q)
    psihat_ic = np.einsum("lm,bm->bl", linv, t.psi_ic)
    tic = 0.25 * np.einsum("b,bl,bk->lk", w, psihat_ic, t.phi_q)
    t0 = 0.25 * np.einsum("a,b,abl,bk->lk", w, w, t.psi_q, t.phi_q)
    wq4 = 0.25 * np.outer(w, w)
    for arr in (lmat, psihat_q, tic, t0, wq4):
        arr.setflags(write=False)
    return PicardOperator(order=order, tables=t, lmat=lmat, psihat_q=psihat_q,
                          tic=tic, t0=t0, wq4=wq4)


def primitive_initial_coefficients(op, sys, q_coeffs):
    """Nodal conservative->primitive conversion followed by modal projection.

    With an order-point rule the projection interpolates the nodal values, so
    the projected polynomial reproduces exactly the admissible primitive states
    seen at the quadrature nodes.
    """
    t = op.tables
    q_nodes = np.einsum("ak,ike->iae", t.phi_q, q_coeffs)
    w_nodes = models.cons_to_prim(sys, q_nodes)
    return 0.5 * np.einsum("a,ak,iae->ike", t.quad.weights, t.phi_q, w_nodes)


def initial_guess(op, a_coeffs):
    """Constant-in-time extension of the spatial primitive modes."""
    return np.einsum("lk,ike->ile", op.t0, a_coeffs)


def picard_iterate(op, sys, w_coeffs, a_coeffs, nu, source_vals=None, half_dt=None):
    """One fixed-point sweep of the space-time system."""
    t = op.tables
    alpha = np.einsum("abl,ile->iabe", t.psi_q, w_coeffs)
    alpha_xi = np.einsum("abl,ile->iabe", t.dpsi_dxi_q, w_coeffs)
    theta = -nu * models.advection_rhs(sys, alpha, alpha_xi)
    if source_vals is not None:
        theta = theta + half_dt * models.primitive_jacobian_inverse_apply(sys, alpha, source_vals)
    new = np.einsum("ab,abl,iabe->ile", op.wq4, op.psihat_q, theta)
    new += np.einsum("lk,ike->ile", op.tic, a_coeffs)
    return new


def limit_prediction(sys, w_coeffs, eps, tables):
    """Rescale higher space-time modes so every positivity component stays
    >= eps at all control points (tensor grid of endpoints + Gauss nodes).

    Returns (limited coefficients, bool mask of touched elements).  Elements
    with an inadmissible space-time mean cannot be repaired and raise.
    """
    n = w_coeffs.shape[0]
    if not sys.positivity_indices:
        return w_coeffs, np.zeros(n, dtype=bool)
    cols = [i - 1 for i in sys.positivity_indices]
    means = w_coeffs[:, 0, cols]                                   # (n, C)
    if np.any(means < eps):
        i, c = np.argwhere(means < eps)[0]
        name = sys.prim_names[cols[c]]
        raise PositivityError(
            f"predicted mean {name}={means[i, c]:.6g} on element {i} is below eps={eps:g}"
        )
    vals = np.einsum("pql,ilc->ipqc", tables.psi_pos, w_coeffs[:, :, cols])
    vmin = vals.min(axis=(1, 2))                                   # (n, C)
    aim = positivity_aim(eps, scale=means)
    denom = means - vmin
    ratio = np.where(denom > 0.0, (means - aim) / np.where(denom > 0.0, denom, 1.0), 1.0)
    theta = np.clip(ratio, 0.0, 1.0).min(axis=1)
    mask = theta < 1.0
    if np.any(mask):
        w_coeffs = w_coeffs.copy()
        w_coeffs[mask, 1:, :] *= theta[mask, None, None]
    return w_coeffs, mask


def predict(op, sys, q_coeffs, nu, eps, *, limit=True, t_n=0.0, dt=None,
            x_centers=None, dx=None, source=None):
    """Full predictor: projection, initial guess, `order` limited Picard sweeps.

    `source(t, x)` (optional) adds a conservative-space forcing evaluated on
    the slab's tensor quadrature nodes; it requires t_n, dt, x_centers, dx.
    Returns (space-time coefficients, mask of elements the limiter touched).
    """
    a_coeffs = primitive_initial_coefficients(op, sys, q_coeffs)
    w_coeffs = initial_guess(op, a_coeffs)
    source_vals = None
    half_dt = None
    if source is not None:
        if dt is None or x_centers is None or dx is None:
            raise ValueError("forced prediction needs dt, x_centers and dx")
        mu = op.tables.quad.nodes
        t_nodes = t_n + 0.5 * dt * (1.0 + mu)
        x_nodes = np.asarray(x_centers)[:, None] + 0.5 * dx * mu[None, :]
        source_vals = np.asarray(
            source(t_nodes[None, :, None], x_nodes[:, None, :]), dtype=float
        )
        half_dt = 0.5 * dt
    limited = np.zeros(q_coeffs.shape[0], dtype=bool)
    for _ in range(op.order):
        w_coeffs = picard_iterate(op, sys, w_coeffs, a_coeffs, nu,
                                  source_vals=source_vals, half_dt=half_dt)
        if limit:
            w_coeffs, mask = limit_prediction(sys, w_coeffs, eps, op.tables)
            limited |= mask
    return w_coeffs, limited
