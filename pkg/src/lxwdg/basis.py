"""Orthonormal Legendre bases, Gauss-Legendre quadrature and point sets.

Spatial basis on [-1,1]: phi_k = sqrt(2k-1) * P_{k-1} (P = standard Legendre),
normalized so that (1/2) * int_{-1}^{1} phi_i phi_j dxi = delta_ij.

Space-time basis on [-1,1]^2: psi_l(tau, xi) = phi_{lt(l)}(tau) * phi_{lx(l)}(xi),
ordered by total degree lt + lx (time index first within a degree block), so that
(1/4) * int int psi_i psi_j dtau dxi = delta_ij.  An order-MO scheme uses the
first MC = MO spatial modes and MP = MC*(MC+1)/2 space-time modes.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np


@dataclass(frozen=True)
class QuadratureRule:
    """Gauss-Legendre nodes/weights on [-1,1], nodes ascending, sum(weights)=2."""

    nodes: np.ndarray
    weights: np.ndarray

    def __len__(self):
        return self.nodes.size


@dataclass(frozen=True)
class PositivityPointSet:
    """Spatial control points for positivity: both endpoints plus the Gauss nodes."""

    spatial: np.ndarray  # shape (order+2,), ascending, includes -1 and +1


def _legendre_pair(n, x):
    # evaluate (P_n, P_{n-1}) by the three-term recurrence
    p0 = np.ones_like(x)
    p1 = x.copy()
    for k in range(2, n + 1):
        p0, p1 = p1, ((2 * k - 1) * x * p1 - (k - 1) * p0) / k
    return p1, p0


@lru_cache(maxsize=None)
def gauss_legendre(n):
    """n-point Gauss-Legendre rule on [-1,1].

    Newton iteration on P_n with Chebyshev-angle initial guesses
    x0 = cos(pi*(4k-1)/(4n+2)); converged to 1e-15 and symmetrized so the
    rule is exactly even (middle node exactly 0 for odd n).
    """
    if n < 1:
        raise ValueError("quadrature rule needs n >= 1")
    if n == 1:
        return QuadratureRule(np.zeros(1), np.full(1, 2.0))
    k = np.arange(1, n + 1)
    x = np.cos(np.pi * (4 * k - 1) / (4 * n + 2))
    for _ in range(100):
        pn, pnm1 = _legendre_pair(n, x)
        dpn = n * (x * pn - pnm1) / (x * x - 1.0)
        dx = pn / dpn
        x -= dx
        if np.max(np.abs(dx)) < 1e-15:
            break
    pn, pnm1 = _legendre_pair(n, x)
    dpn = n * (x * pn - pnm1) / (x * x - 1.0)
    w = 2.0 / ((1.0 - x * x) * dpn * dpn)
    # exact symmetry: nodes come out descending from the Chebyshev guesses
    x = 0.5 * (x - x[::-1])
    w = 0.5 * (w + w[::-1])
    order = np.argsort(x)
    x = np.ascontiguousarray(x[order])
    w = np.ascontiguousarray(w[order])
    x.setflags(write=False)
    w.setflags(write=False)
    return QuadratureRule(x, w)


def legendre_phi(xi, count):
    """Evaluate phi_1..phi_count at xi; returns shape xi.shape + (count,)."""
    xi = np.asarray(xi, dtype=float)
    out = np.empty(xi.shape + (count,))
    out[..., 0] = 1.0
    if count > 1:
        out[..., 1] = np.sqrt(3.0) * xi
    for k in range(3, count + 1):
        c1 = np.sqrt((2 * k - 3.0) * (2 * k - 1.0)) / (k - 1.0)
        c2 = (k - 2.0) * np.sqrt(2 * k - 1.0) / ((k - 1.0) * np.sqrt(2 * k - 5.0))
        out[..., k - 1] = c1 * xi * out[..., k - 2] - c2 * out[..., k - 3]
    return out


def legendre_phi_deriv(xi, count):
    """d/dxi of phi_1..phi_count at xi; same shape convention as legendre_phi."""
    xi = np.asarray(xi, dtype=float)
    phi = legendre_phi(xi, count)
    out = np.zeros(xi.shape + (count,))
    if count > 1:
        out[..., 1] = np.sqrt(3.0)
    for k in range(3, count + 1):
        c1 = np.sqrt((2 * k - 3.0) * (2 * k - 1.0)) / (k - 1.0)
        c2 = (k - 2.0) * np.sqrt(2 * k - 1.0) / ((k - 1.0) * np.sqrt(2 * k - 5.0))
        out[..., k - 1] = c1 * (xi * out[..., k - 2] + phi[..., k - 2]) - c2 * out[..., k - 3]
    return out


@lru_cache(maxsize=None)
def spacetime_index_map(order):
    """Mode -> (l_tau, l_xi), 1-based, ordered by total degree then l_tau."""
    pairs = []
    for degree in range(2, order + 2):
        for lt in range(1, degree):
            pairs.append((lt, degree - lt))
    return tuple(pairs)


def _gather_pairs(order):
    idx = np.array(spacetime_index_map(order), dtype=int) - 1
    return idx[:, 0], idx[:, 1]


def spacetime_psi(tau, xi, order):
    """Evaluate psi_1..psi_MP at (tau, xi); returns shape bcast + (MP,)."""
    it, ix = _gather_pairs(order)
    pt = legendre_phi(tau, order)
    px = legendre_phi(xi, order)
    return pt[..., it] * px[..., ix]


def spacetime_psi_dtau(tau, xi, order):
    """d/dtau of the space-time basis."""
    it, ix = _gather_pairs(order)
    dpt = legendre_phi_deriv(tau, order)
    px = legendre_phi(xi, order)
    return dpt[..., it] * px[..., ix]


def spacetime_psi_dxi(tau, xi, order):
    """d/dxi of the space-time basis."""
    it, ix = _gather_pairs(order)
    pt = legendre_phi(tau, order)
    dpx = legendre_phi_deriv(xi, order)
    return pt[..., it] * dpx[..., ix]


@lru_cache(maxsize=None)
def positivity_points(order):
    """Control points {-1} U {Gauss nodes} U {+1} used by the positivity limiters.

    Every purely spatial quadrature node used anywhere in the scheme is a member,
    so pointwise-positive data stays admissible for all nodal evaluations.
    """
    rule = gauss_legendre(order)
    pts = np.concatenate(([-1.0], rule.nodes, [1.0]))
    pts.setflags(write=False)
    return PositivityPointSet(pts)


@dataclass(frozen=True)
class BasisTables:
    """Dense basis evaluations reused every step (all geometry-free).

    Index conventions: quadrature node axes are ordered (tau, xi) for space-time
    tables; `phi_edge` rows are (xi=-1, xi=+1); `psi_face` rows likewise.
    """

    order: int
    n_modes: int        # MC, spatial
    n_st_modes: int     # MP, space-time
    quad: QuadratureRule
    phi_q: np.ndarray        # (MO, MC)    phi at Gauss nodes
    dphi_q: np.ndarray       # (MO, MC)
    phi_edge: np.ndarray     # (2, MC)     phi at xi = -1, +1
    phi_pos: np.ndarray      # (MO+2, MC)  phi at positivity points
    psi_q: np.ndarray        # (MO, MO, MP)   psi at (tau_a, xi_b)
    dpsi_dxi_q: np.ndarray   # (MO, MO, MP)
    psi_face: np.ndarray     # (2, MO, MP)    psi at (tau_a, xi=-1/+1)
    psi_ic: np.ndarray       # (MO, MP)       psi at (tau=-1, xi_b)
    psi_pos: np.ndarray      # (MO+2, MO+2, MP) psi on the positivity tensor grid


@lru_cache(maxsize=None)
def basis_tables(order):
    """Build (and cache) all dense basis tables for a given order."""
    mc = order
    mp = mc * (mc + 1) // 2
    quad = gauss_legendre(order)
    mu = quad.nodes
    tg, xg = np.meshgrid(mu, mu, indexing="ij")
    pos = positivity_points(order).spatial
    tp, xp = np.meshgrid(pos, pos, indexing="ij")
    edges = np.array([-1.0, 1.0])
    tf, xf = np.meshgrid(mu, edges, indexing="ij")
    tables = BasisTables(
        order=order,
        n_modes=mc,
        n_st_modes=mp,
        quad=quad,
        phi_q=legendre_phi(mu, mc),
        dphi_q=legendre_phi_deriv(mu, mc),
        phi_edge=legendre_phi(edges, mc),
        phi_pos=legendre_phi(pos, mc),
        psi_q=spacetime_psi(tg, xg, order),
        dpsi_dxi_q=spacetime_psi_dxi(tg, xg, order),
        psi_face=np.swapaxes(spacetime_psi(tf, xf, order), 0, 1),
        psi_ic=spacetime_psi(np.full_like(mu, -1.0), mu, order),
        psi_pos=spacetime_psi(tp, xp, order),
    )
    for arr in (tables.phi_q, tables.dphi_q, tables.phi_edge, tables.phi_pos,
                tables.psi_q, tables.dpsi_dxi_q, tables.psi_face, tables.psi_ic,
                tables.psi_pos):
        arr.setflags(write=False)
    return tables
