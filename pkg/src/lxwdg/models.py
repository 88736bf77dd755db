"""Hyperbolic systems: Burgers, shallow water, compressible Euler.

All state arrays carry components on the last axis; every operation broadcasts
over arbitrary leading axes.  Conservative vectors q and primitive vectors w:

    burgers        q = (u)            w = (u)
    shallow_water  q = (h, hu)        w = (h, u)
    euler          q = (rho, rho*u, E) w = (rho, u, p),  E = p/(gamma-1) + rho*u^2/2

Positivity components are primitive entries that the limiters keep >= eps
(h for shallow water; rho and p for Euler).  Divisions by a state component
are guarded by DIV_FLOOR; crossing it raises DomainError rather than emitting
inf/nan.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DomainError

# hard floor for divisions by h or rho; limiters keep states far above this
DIV_FLOOR = 1e-100


@dataclass(frozen=True)
class SystemDescriptor:
    """Identity and fixed parameters of one hyperbolic system."""

    name: str
    m_eqn: int
    params: tuple
    positivity_indices: tuple   # 1-based indices into the primitive vector
    prim_names: tuple           # primitive variable labels, for CSV headers
    cons_names: tuple


def burgers():
    return SystemDescriptor("burgers", 1, (), (), ("u",), ("q1",))


def shallow_water(g=1.0):
    if g <= 0.0:
        raise ValueError("gravity constant must be positive")
    return SystemDescriptor("shallow_water", 2, (float(g),), (1,), ("h", "u"), ("q1", "q2"))


def euler(gamma=1.4):
    if gamma <= 1.0:
        raise ValueError("gamma must exceed 1")
    return SystemDescriptor("euler", 3, (float(gamma),), (1, 3), ("rho", "u", "p"), ("q1", "q2", "q3"))


def _guard_divisor(val, label):
    if np.any(np.abs(val) < DIV_FLOOR):
        raise DomainError(f"{label} fell below the division floor {DIV_FLOOR:g}")


# Velocity recovery u = m/h is ill-posed once h sits on the positivity floor:
# the limiter pins h ~ 1e-14 at a control point while m keeps an O(eps)
# residual there, and the raw quotient explodes to ~1e8, taking the predictor
# down with it. Below VEL_FLOOR (~sqrt of the default floor) we switch to the
# Kurganov-Petrova desingularized quotient, which matches m/h exactly at the
# seam, stays odd in h, and decays to zero with h. States with h >= VEL_FLOOR
# take the plain-division branch and are untouched bit for bit.
VEL_FLOOR = 1e-7


def _vacuum_safe_div(num, den):
    num = np.asarray(num, dtype=float)
    den = np.asarray(den, dtype=float)
    if num.ndim == 0 and den.ndim == 0:
        if abs(den) >= VEL_FLOOR:
            return num / den
        return np.sqrt(2.0) * num * den / np.sqrt(den ** 4 + VEL_FLOOR ** 4)
    healthy = np.abs(den) >= VEL_FLOOR
    if np.all(healthy):
        return num / den
    out = np.empty(np.broadcast(num, den).shape)
    num, den = np.broadcast_arrays(num, den)
    out[healthy] = num[healthy] / den[healthy]
    bad_n, bad_d = num[~healthy], den[~healthy]
    out[~healthy] = np.sqrt(2.0) * bad_n * bad_d / np.sqrt(bad_d ** 4 + VEL_FLOOR ** 4)
    return out


# ------------------------------------------------------------- conversions


def cons_to_prim(sys, q):
    q = np.asarray(q, dtype=float)
    if sys.name == "burgers":
        return q.copy()
    if sys.name == "shallow_water":
        h = q[..., 0]
        _guard_divisor(h, "water height h")
        return np.stack([h, _vacuum_safe_div(q[..., 1], h)], axis=-1)
    gamma, = sys.params
    rho = q[..., 0]
    _guard_divisor(rho, "density rho")
    u = _vacuum_safe_div(q[..., 1], rho)
    p = (gamma - 1.0) * (q[..., 2] - 0.5 * rho * u * u)
    return np.stack([rho, u, p], axis=-1)


def prim_to_cons(sys, w):
    w = np.asarray(w, dtype=float)
    if sys.name == "burgers":
        return w.copy()
    if sys.name == "shallow_water":
        h, u = w[..., 0], w[..., 1]
        return np.stack([h, h * u], axis=-1)
    gamma, = sys.params
    rho, u, p = w[..., 0], w[..., 1], w[..., 2]
    return np.stack([rho, rho * u, p / (gamma - 1.0) + 0.5 * rho * u * u], axis=-1)


# ------------------------------------------------------------------- fluxes


def flux(sys, q):
    q = np.asarray(q, dtype=float)
    if sys.name == "burgers":
        return 0.5 * q * q
    if sys.name == "shallow_water":
        g, = sys.params
        h, hu = q[..., 0], q[..., 1]
        _guard_divisor(h, "water height h")
        return np.stack(
            [hu, _vacuum_safe_div(hu * hu, h) + 0.5 * g * h * h], axis=-1
        )
    gamma, = sys.params
    rho, m, en = q[..., 0], q[..., 1], q[..., 2]
    _guard_divisor(rho, "density rho")
    u = _vacuum_safe_div(m, rho)
    p = (gamma - 1.0) * (en - 0.5 * m * u)
    return np.stack([m, m * u + p, u * (en + p)], axis=-1)


def flux_from_primitive(sys, w):
    """Flux evaluated directly on primitive data (no division needed)."""
    w = np.asarray(w, dtype=float)
    if sys.name == "burgers":
        return 0.5 * w * w
    if sys.name == "shallow_water":
        g, = sys.params
        h, u = w[..., 0], w[..., 1]
        return np.stack([h * u, h * u * u + 0.5 * g * h * h], axis=-1)
    gamma, = sys.params
    rho, u, p = w[..., 0], w[..., 1], w[..., 2]
    en = p / (gamma - 1.0) + 0.5 * rho * u * u
    return np.stack([rho * u, rho * u * u + p, u * (en + p)], axis=-1)


def spectral_radius(sys, q):
    """max |eigenvalue| of the flux Jacobian at conservative state q."""
    return spectral_radius_from_primitive(sys, cons_to_prim(sys, q))


def spectral_radius_from_primitive(sys, w):
    w = np.asarray(w, dtype=float)
    if sys.name == "burgers":
        return np.abs(w[..., 0])
    if sys.name == "shallow_water":
        g, = sys.params
        h, u = w[..., 0], w[..., 1]
        if np.any(h < 0.0):
            raise DomainError("negative water height in wave speed evaluation")
        return np.abs(u) + np.sqrt(g * h)
    gamma, = sys.params
    rho, u, p = w[..., 0], w[..., 1], w[..., 2]
    _guard_divisor(rho, "density rho")
    ratio = gamma * p / rho
    if np.any(ratio < 0.0):
        raise DomainError("negative p/rho in sound speed evaluation")
    return np.abs(u) + np.sqrt(ratio)


# -------------------------------------------------- primitive quasilinear form


def primitive_matrix(sys, w):
    """Coefficient matrix B(w) of the primitive quasilinear form w_t + B w_x = 0."""
    w = np.asarray(w, dtype=float)
    m = sys.m_eqn
    out = np.zeros(w.shape[:-1] + (m, m))
    if sys.name == "burgers":
        out[..., 0, 0] = w[..., 0]
        return out
    if sys.name == "shallow_water":
        g, = sys.params
        h, u = w[..., 0], w[..., 1]
        out[..., 0, 0] = u
        out[..., 0, 1] = h
        out[..., 1, 0] = g
        out[..., 1, 1] = u
        return out
    gamma, = sys.params
    rho, u, p = w[..., 0], w[..., 1], w[..., 2]
    _guard_divisor(rho, "density rho")
    out[..., 0, 0] = u
    out[..., 0, 1] = rho
    out[..., 1, 1] = u
    out[..., 1, 2] = 1.0 / rho
    out[..., 2, 1] = gamma * p
    out[..., 2, 2] = u
    return out


def advection_rhs(sys, w, w_x):
    """B(w) @ w_x written out componentwise (hot path of the predictor)."""
    if sys.name == "burgers":
        return w * w_x
    if sys.name == "shallow_water":
        g, = sys.params
        h, u = w[..., 0], w[..., 1]
        hx, ux = w_x[..., 0], w_x[..., 1]
        return np.stack([u * hx + h * ux, g * hx + u * ux], axis=-1)
    gamma, = sys.params
    rho, u, p = w[..., 0], w[..., 1], w[..., 2]
    _guard_divisor(rho, "density rho")
    rx, ux, px = w_x[..., 0], w_x[..., 1], w_x[..., 2]
    return np.stack(
        [u * rx + rho * ux, u * ux + px / rho, gamma * p * ux + u * px], axis=-1
    )


def primitive_jacobian_inverse_apply(sys, w, s):
    """(dq/dw)^{-1} s: map a conservative-space vector into primitive space."""
    if sys.name == "burgers":
        return np.asarray(s, dtype=float).copy()
    if sys.name == "shallow_water":
        # dq/dw = [[1,0],[u,h]]
        h, u = w[..., 0], w[..., 1]
        _guard_divisor(h, "water height h")
        s1, s2 = s[..., 0], s[..., 1]
        return np.stack([s1, (s2 - u * s1) / h], axis=-1)
    gamma, = sys.params
    rho, u = w[..., 0], w[..., 1]
    _guard_divisor(rho, "density rho")
    s1, s2, s3 = s[..., 0], s[..., 1], s[..., 2]
    du = (s2 - u * s1) / rho
    dp = (gamma - 1.0) * (s3 - 0.5 * u * u * s1 - rho * u * du)
    return np.stack([s1, du, dp], axis=-1)


# ------------------------------------------------------------ eigenvectors


def right_eigenvectors(sys, q):
    """Columns are right eigenvectors of the conservative flux Jacobian at q."""
    q = np.asarray(q, dtype=float)
    m = sys.m_eqn
    out = np.zeros(q.shape[:-1] + (m, m))
    if sys.name == "burgers":
        out[..., 0, 0] = 1.0
        return out
    w = cons_to_prim(sys, q)
    if sys.name == "shallow_water":
        g, = sys.params
        h, u = w[..., 0], w[..., 1]
        if np.any(h < 0.0):
            raise DomainError("negative water height in eigenvector evaluation")
        c = np.sqrt(g * h)
        out[..., 0, 0] = 1.0
        out[..., 0, 1] = 1.0
        out[..., 1, 0] = u - c
        out[..., 1, 1] = u + c
        return out
    gamma, = sys.params
    rho, u, p = w[..., 0], w[..., 1], w[..., 2]
    ratio = gamma * p / rho
    if np.any(ratio < 0.0):
        raise DomainError("negative p/rho in eigenvector evaluation")
    c = np.sqrt(ratio)
    enthalpy = gamma * p / ((gamma - 1.0) * rho) + 0.5 * u * u
    out[..., 0, :] = 1.0
    out[..., 1, 0] = u - c
    out[..., 1, 1] = u
    out[..., 1, 2] = u + c
    out[..., 2, 0] = enthalpy - u * c
    out[..., 2, 1] = 0.5 * u * u
    out[..., 2, 2] = enthalpy + u * c
    return out


def left_eigenvectors(sys, q):
    """Inverse of right_eigenvectors, in closed form (rows are left eigenvectors)."""
    q = np.asarray(q, dtype=float)
    m = sys.m_eqn
    out = np.zeros(q.shape[:-1] + (m, m))
    if sys.name == "burgers":
        out[..., 0, 0] = 1.0
        return out
    w = cons_to_prim(sys, q)
    if sys.name == "shallow_water":
        g, = sys.params
        h, u = w[..., 0], w[..., 1]
        c = np.sqrt(g * h)
        _guard_divisor(c, "gravity wave speed sqrt(g*h)")
        inv2c = 0.5 / c
        out[..., 0, 0] = (c + u) * inv2c
        out[..., 0, 1] = -inv2c * np.ones_like(u)
        out[..., 1, 0] = (c - u) * inv2c
        out[..., 1, 1] = inv2c * np.ones_like(u)
        return out
    gamma, = sys.params
    rho, u, p = w[..., 0], w[..., 1], w[..., 2]
    c = np.sqrt(gamma * p / rho)
    _guard_divisor(c * p, "sound speed times pressure")
    b1 = (gamma - 1.0) / (c * c)     # (gamma-1)*rho/(gamma*p)
    b2 = 0.5 * b1 * u * u
    out[..., 0, 0] = 0.5 * (b2 + u / c)
    out[..., 0, 1] = -0.5 * (b1 * u + 1.0 / c)
    out[..., 0, 2] = 0.5 * b1
    out[..., 1, 0] = 1.0 - b2
    out[..., 1, 1] = b1 * u
    out[..., 1, 2] = -b1
    out[..., 2, 0] = 0.5 * (b2 - u / c)
    out[..., 2, 1] = -0.5 * (b1 * u - 1.0 / c)
    out[..., 2, 2] = 0.5 * b1
    return out


# -------------------------------------------------------------- positivity


def pointwise_positivity_values(sys, q):
    """Values that must stay >= eps, evaluated from a conservative state.

    Total on all inputs (negative states included) so limiters can measure how
    far a state violates positivity.  Shape (..., n_pos); n_pos = 0 for burgers.
    """
    q = np.asarray(q, dtype=float)
    if sys.name == "burgers":
        return np.zeros(q.shape[:-1] + (0,))
    if sys.name == "shallow_water":
        return q[..., :1].copy()
    gamma, = sys.params
    rho, m, en = q[..., 0], q[..., 1], q[..., 2]
    # total by contract: never raises, even on degenerate states, so the
    # division is floored instead of guarded
    safe_rho = np.where(np.abs(rho) < DIV_FLOOR, DIV_FLOOR, rho)
    p = (gamma - 1.0) * (en - 0.5 * m * m / safe_rho)
    return np.stack([rho, p], axis=-1)


def primitive_positivity_values(sys, w):
    """Same quantities extracted from a primitive state (plain component picks)."""
    w = np.asarray(w, dtype=float)
    idx = [i - 1 for i in sys.positivity_indices]
    return w[..., idx].copy()
