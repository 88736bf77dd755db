"""Reference solutions for validation: exact Riemann solvers for shallow water
and Euler (vacuum states included), characteristic tracing for the scalar
equation, and a manufactured forced shallow-water solution.

Riemann solutions are self-similar in xi = x/t and sampled in primitive
variables; star values come from a bracketed root solve of the standard
two-wave function, so no Newton tuning is involved.
"""

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from . import models
from .basis import gauss_legendre
from .errors import SolverError

_BRENTQ_RTOL = 4 * np.finfo(float).eps


@dataclass(frozen=True)
class Wave:
    kind: str           # "shock", "rarefaction", "contact" or "front"
    head: float
    tail: float         # equals head for shocks and contacts


class RiemannSolution:
    """Self-similar two-state solution; sample with xi = x/t."""

    def __init__(self, sys, left, right, star, waves, sampler):
        self.sys = sys
        self.left = np.asarray(left, dtype=float)
        self.right = np.asarray(right, dtype=float)
        self.star = star
        self.waves = tuple(waves)
        self._sampler = sampler

    @property
    def has_vacuum(self):
        return any(w.kind == "front" for w in self.waves)

    def sample_primitive(self, xi):
        xi = np.asarray(xi, dtype=float)
        return self._sampler(np.atleast_1d(xi)).reshape(xi.shape + (self.sys.m_eqn,))

    def sample_conservative(self, xi):
        return models.prim_to_cons(self.sys, self.sample_primitive(xi))


def _bracketed_root(fn, x_hi_seed):
    """Root of an increasing function that is negative at 0+."""
    lo = 1e-14 * x_hi_seed
    while fn(lo) > 0.0:
        lo *= 1e-4
        if lo == 0.0:
            raise SolverError("wave equation root collapsed to zero")
    hi = x_hi_seed
    for _ in range(200):
        if fn(hi) > 0.0:
            break
        hi *= 2.0
    else:
        raise SolverError("no bracket for the wave equation root")
    return brentq(fn, lo, hi, xtol=1e-300, rtol=_BRENTQ_RTOL)


# ------------------------------------------------------------ shallow water


def shallow_water_riemann(sys, left, right):
    """Exact solution of the shallow-water Riemann problem, primitive inputs (h, u)."""
    g, = sys.params
    h_l, u_l = float(left[0]), float(left[1])
    h_r, u_r = float(right[0]), float(right[1])
    if h_l <= 0.0 or h_r <= 0.0:
        raise SolverError("Riemann initial heights must be positive")
    c_l, c_r = np.sqrt(g * h_l), np.sqrt(g * h_r)

    def wave_fn(h, h_k, c_k):
        if h > h_k:
            return (h - h_k) * np.sqrt(0.5 * g * (h + h_k) / (h * h_k))
        return 2.0 * (np.sqrt(g * h) - c_k)

    if u_r - u_l >= 2.0 * (c_l + c_r):
        # wave fronts separate: dry bed in between
        front_l = u_l + 2.0 * c_l
        front_r = u_r - 2.0 * c_r
        waves = (
            Wave("rarefaction", u_l - c_l, front_l),
            Wave("front", front_l, front_r),
            Wave("rarefaction", front_r, u_r + c_r),
        )

        def sampler(xi):
            h = np.zeros_like(xi)
            u = np.zeros_like(xi)
            in_l = xi < u_l - c_l
            in_fan_l = (xi >= u_l - c_l) & (xi < front_l)
            in_fan_r = (xi > front_r) & (xi <= u_r + c_r)
            in_r = xi > u_r + c_r
            h[in_l], u[in_l] = h_l, u_l
            h[in_r], u[in_r] = h_r, u_r
            c = (u_l + 2.0 * c_l - xi[in_fan_l]) / 3.0
            h[in_fan_l] = c * c / g
            u[in_fan_l] = (u_l + 2.0 * c_l + 2.0 * xi[in_fan_l]) / 3.0
            c = (xi[in_fan_r] - u_r + 2.0 * c_r) / 3.0
            h[in_fan_r] = c * c / g
            u[in_fan_r] = (u_r - 2.0 * c_r + 2.0 * xi[in_fan_r]) / 3.0
            return np.stack([h, u], axis=-1)

        star = {"h": 0.0, "u": 0.5 * (front_l + front_r)}
        return RiemannSolution(sys, left, right, star, waves, sampler)

    h_star = _bracketed_root(
        lambda h: wave_fn(h, h_l, c_l) + wave_fn(h, h_r, c_r) + (u_r - u_l),
        max(h_l, h_r),
    )
    u_star = 0.5 * (u_l + u_r) + 0.5 * (wave_fn(h_star, h_r, c_r) - wave_fn(h_star, h_l, c_l))
    c_star = np.sqrt(g * h_star)

    if h_star > h_l:
        s = u_l - c_l * np.sqrt(0.5 * h_star * (h_star + h_l)) / h_l
        left_wave = Wave("shock", s, s)
    else:
        left_wave = Wave("rarefaction", u_l - c_l, u_star - c_star)
    if h_star > h_r:
        s = u_r + c_r * np.sqrt(0.5 * h_star * (h_star + h_r)) / h_r
        right_wave = Wave("shock", s, s)
    else:
        right_wave = Wave("rarefaction", u_star + c_star, u_r + c_r)
    waves = (left_wave, right_wave)

    def sampler(xi):
        h = np.full_like(xi, h_star)
        u = np.full_like(xi, u_star)
        in_l = xi < left_wave.head
        in_r = xi > right_wave.tail
        h[in_l], u[in_l] = h_l, u_l
        h[in_r], u[in_r] = h_r, u_r
        if left_wave.kind == "rarefaction":
            fan = (xi >= left_wave.head) & (xi < left_wave.tail)
            c = (u_l + 2.0 * c_l - xi[fan]) / 3.0
            h[fan] = c * c / g
            u[fan] = (u_l + 2.0 * c_l + 2.0 * xi[fan]) / 3.0
        if right_wave.kind == "rarefaction":
            fan = (xi > right_wave.head) & (xi <= right_wave.tail)
            c = (xi[fan] - u_r + 2.0 * c_r) / 3.0
            h[fan] = c * c / g
            u[fan] = (u_r - 2.0 * c_r + 2.0 * xi[fan]) / 3.0
        return np.stack([h, u], axis=-1)

    star = {"h": h_star, "u": u_star}
    return RiemannSolution(sys, left, right, star, waves, sampler)


# -------------------------------------------------------------------- euler


def euler_riemann(sys, left, right):
    """Exact solution of the Euler Riemann problem, primitive inputs (rho, u, p)."""
    gamma, = sys.params
    rho_l, u_l, p_l = (float(v) for v in left)
    rho_r, u_r, p_r = (float(v) for v in right)
    if min(rho_l, rho_r, p_l, p_r) <= 0.0:
        raise SolverError("Riemann initial density and pressure must be positive")
    c_l = np.sqrt(gamma * p_l / rho_l)
    c_r = np.sqrt(gamma * p_r / rho_r)
    gm = (gamma - 1.0) / (gamma + 1.0)
    ex = 0.5 * (gamma - 1.0) / gamma

    def wave_fn(p, p_k, rho_k, c_k):
        if p > p_k:
            a_k = 2.0 / ((gamma + 1.0) * rho_k)
            b_k = gm * p_k
            return (p - p_k) * np.sqrt(a_k / (p + b_k))
        return 2.0 * c_k / (gamma - 1.0) * ((p / p_k) ** ex - 1.0)

    def fan_left(xi):
        u = 2.0 / (gamma + 1.0) * (c_l + 0.5 * (gamma - 1.0) * u_l + xi)
        c = 2.0 / (gamma + 1.0) * (c_l + 0.5 * (gamma - 1.0) * (u_l - xi))
        rho = rho_l * (c / c_l) ** (2.0 / (gamma - 1.0))
        p = p_l * (c / c_l) ** (2.0 * gamma / (gamma - 1.0))
        return rho, u, p

    def fan_right(xi):
        u = 2.0 / (gamma + 1.0) * (-c_r + 0.5 * (gamma - 1.0) * u_r + xi)
        c = 2.0 / (gamma + 1.0) * (c_r - 0.5 * (gamma - 1.0) * (u_r - xi))
        rho = rho_r * (c / c_r) ** (2.0 / (gamma - 1.0))
        p = p_r * (c / c_r) ** (2.0 * gamma / (gamma - 1.0))
        return rho, u, p

    if u_r - u_l >= 2.0 * c_l / (gamma - 1.0) + 2.0 * c_r / (gamma - 1.0):
        front_l = u_l + 2.0 * c_l / (gamma - 1.0)
        front_r = u_r - 2.0 * c_r / (gamma - 1.0)
        waves = (
            Wave("rarefaction", u_l - c_l, front_l),
            Wave("front", front_l, front_r),
            Wave("rarefaction", front_r, u_r + c_r),
        )

        def sampler(xi):
            rho = np.zeros_like(xi)
            u = np.zeros_like(xi)
            p = np.zeros_like(xi)
            in_l = xi < u_l - c_l
            in_fan_l = (xi >= u_l - c_l) & (xi < front_l)
            in_fan_r = (xi > front_r) & (xi <= u_r + c_r)
            in_r = xi > u_r + c_r
            rho[in_l], u[in_l], p[in_l] = rho_l, u_l, p_l
            rho[in_r], u[in_r], p[in_r] = rho_r, u_r, p_r
            rho[in_fan_l], u[in_fan_l], p[in_fan_l] = fan_left(xi[in_fan_l])
            rho[in_fan_r], u[in_fan_r], p[in_fan_r] = fan_right(xi[in_fan_r])
            return np.stack([rho, u, p], axis=-1)

        star = {"p": 0.0, "u": 0.5 * (front_l + front_r), "rho_l": 0.0, "rho_r": 0.0}
        return RiemannSolution(sys, left, right, star, waves, sampler)

    p_star = _bracketed_root(
        lambda p: wave_fn(p, p_l, rho_l, c_l) + wave_fn(p, p_r, rho_r, c_r) + (u_r - u_l),
        max(p_l, p_r),
    )
    u_star = 0.5 * (u_l + u_r) + 0.5 * (
        wave_fn(p_star, p_r, rho_r, c_r) - wave_fn(p_star, p_l, rho_l, c_l)
    )

    if p_star > p_l:
        rho_star_l = rho_l * (p_star / p_l + gm) / (gm * p_star / p_l + 1.0)
        s = u_l - c_l * np.sqrt((gamma + 1.0) / (2.0 * gamma) * p_star / p_l
                                + (gamma - 1.0) / (2.0 * gamma))
        left_wave = Wave("shock", s, s)
    else:
        rho_star_l = rho_l * (p_star / p_l) ** (1.0 / gamma)
        c_star_l = c_l * (p_star / p_l) ** ex
        left_wave = Wave("rarefaction", u_l - c_l, u_star - c_star_l)
    if p_star > p_r:
        rho_star_r = rho_r * (p_star / p_r + gm) / (gm * p_star / p_r + 1.0)
        s = u_r + c_r * np.sqrt((gamma + 1.0) / (2.0 * gamma) * p_star / p_r
                                + (gamma - 1.0) / (2.0 * gamma))
        right_wave = Wave("shock", s, s)
    else:
        rho_star_r = rho_r * (p_star / p_r) ** (1.0 / gamma)
        c_star_r = c_r * (p_star / p_r) ** ex
        right_wave = Wave("rarefaction", u_star + c_star_r, u_r + c_r)
    waves = (left_wave, Wave("contact", u_star, u_star), right_wave)

    def sampler(xi):
        rho = np.where(xi < u_star, rho_star_l, rho_star_r)
        u = np.full_like(xi, u_star)
        p = np.full_like(xi, p_star)
        in_l = xi < left_wave.head
        in_r = xi > right_wave.tail
        rho[in_l], u[in_l], p[in_l] = rho_l, u_l, p_l
        rho[in_r], u[in_r], p[in_r] = rho_r, u_r, p_r
        if left_wave.kind == "rarefaction":
            fan = (xi >= left_wave.head) & (xi < left_wave.tail)
            rho[fan], u[fan], p[fan] = fan_left(xi[fan])
        if right_wave.kind == "rarefaction":
            fan = (xi > right_wave.head) & (xi <= right_wave.tail)
            rho[fan], u[fan], p[fan] = fan_right(xi[fan])
        return np.stack([rho, u, p], axis=-1)

    star = {"p": p_star, "u": u_star, "rho_l": rho_star_l, "rho_r": rho_star_r}
    return RiemannSolution(sys, left, right, star, waves, sampler)


def riemann_solution(sys, left, right):
    """Dispatch on the system; left/right are primitive states."""
    if sys.name == "shallow_water":
        return shallow_water_riemann(sys, left, right)
    if sys.name == "euler":
        return euler_riemann(sys, left, right)
    raise SolverError(f"no exact Riemann solution implemented for {sys.name!r}")


# ------------------------------------------------------------------ scalar


def burgers_exact(ic, x, t, *, ic_range=None):
    """Solve u = ic(x - u t) pointwise; valid strictly before shock formation.

    `ic_range` optionally supplies (min, max) of the initial data; otherwise it
    is estimated by dense sampling around the query points.
    """
    x = np.asarray(x, dtype=float)
    t = float(t)
    if t == 0.0:
        return np.asarray(ic(x), dtype=float)
    if ic_range is None:
        probe = np.linspace(x.min() - 1.0, x.max() + 1.0, 4001)
        vals = np.asarray(ic(probe), dtype=float)
        u_min, u_max = float(vals.min()), float(vals.max())
        slope = np.diff(vals) / np.diff(probe)
        if t * slope.min() <= -1.0:
            raise SolverError(
                f"characteristics cross before t={t:g}; no classical solution"
            )
    else:
        u_min, u_max = ic_range
    pad = 1e-9 * (1.0 + u_max - u_min)
    out = np.empty(x.shape)
    flat = x.ravel()
    res = out.ravel()
    for i, xi in enumerate(flat):
        res[i] = brentq(
            lambda u: u - float(ic(np.asarray(xi - u * t))),
            u_min - pad, u_max + pad, xtol=1e-300, rtol=_BRENTQ_RTOL,
        )
    return out


# ------------------------------------------------------------ forced system


def forced_shallow_water_exact(t, x):
    """Primitive exact state (h, u) of the forced shallow-water test."""
    t = np.asarray(t, dtype=float)
    x = np.asarray(x, dtype=float)
    h = 1.0 + 0.5 * np.sin(np.pi * (x - t))
    u = np.cos(2.0 * np.pi * (x - 2.0 * t))
    return np.stack(np.broadcast_arrays(h, u), axis=-1)


def forced_shallow_water_conservative(t, x):
    h_u = forced_shallow_water_exact(t, x)
    h, u = h_u[..., 0], h_u[..., 1]
    return np.stack([h, h * u], axis=-1)


def forced_shallow_water_source(t, x, g=1.0):
    """Forcing that makes forced_shallow_water_exact solve the system exactly."""
    t = np.asarray(t, dtype=float)
    x = np.asarray(x, dtype=float)
    ph = np.pi * (x - t)
    pu = 2.0 * np.pi * (x - 2.0 * t)
    h = 1.0 + 0.5 * np.sin(ph)
    u = np.cos(pu)
    h_t = -0.5 * np.pi * np.cos(ph)
    h_x = 0.5 * np.pi * np.cos(ph)
    u_t = 4.0 * np.pi * np.sin(pu)
    u_x = -2.0 * np.pi * np.sin(pu)
    s1 = h_t + h_x * u + h * u_x
    s2 = h_t * u + h * u_t + h_x * u * u + 2.0 * h * u * u_x + g * h * h_x
    return np.stack(np.broadcast_arrays(s1, s2), axis=-1)


# ------------------------------------------------------------------ errors


def l1_error_vs_reference(state, mesh, ref_fn):
    """Elementwise Gauss quadrature of sum_e |q_e - ref_e| over the domain."""
    rule = gauss_legendre(state.order)
    x = mesh.nodes(rule.nodes)
    from .basis import legendre_phi

    phi = legendre_phi(rule.nodes, state.order)
    approx = np.einsum("ak,ike->iae", phi, state.q)
    exact = np.asarray(ref_fn(x), dtype=float)
    if exact.shape != approx.shape:
        raise SolverError(
            f"reference returned shape {exact.shape}, expected {approx.shape}"
        )
    return float(0.5 * mesh.dx * np.einsum("a,iae->", rule.weights, np.abs(approx - exact)))
