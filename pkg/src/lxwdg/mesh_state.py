"""Uniform mesh, modal solution storage, projections, norms and CSV output.

Solution layout: Q has shape (m_elem, MC, m_eqn); Q[i, k, e] is the coefficient
of the k-th orthonormal Legendre mode of equation e on element i, so Q[:, 0, :]
are the cell means.  Element centers sit at x_low + (i + 1/2) dx (0-based i).
"""

import enum
from dataclasses import dataclass

import numpy as np

from . import models
from .basis import basis_tables, gauss_legendre, legendre_phi
from .errors import ConfigError, SolverError


class BoundaryCondition(enum.Enum):
    PERIODIC = "periodic"
    OUTFLOW = "outflow"

    @classmethod
    def parse(cls, text):
        try:
            return cls(str(text).strip().lower())
        except ValueError:
            valid = ", ".join(m.value for m in cls)
            raise ConfigError(f"bc must be one of: {valid} (got {text!r})") from None


@dataclass(frozen=True)
class Mesh:
    """Uniform 1D mesh on [x_low, x_high] with m_elem elements."""

    x_low: float
    x_high: float
    m_elem: int

    def __post_init__(self):
        if not self.x_high > self.x_low:
            raise ConfigError("mesh needs x_high > x_low")
        if self.m_elem < 1:
            raise ConfigError("mesh needs at least one element")

    @property
    def dx(self):
        return (self.x_high - self.x_low) / self.m_elem

    def centers(self):
        i = np.arange(self.m_elem)
        return self.x_low + (i + 0.5) * self.dx

    def nodes(self, ref_points):
        """Physical coordinates of reference points on every element, (m_elem, n)."""
        return self.centers()[:, None] + 0.5 * self.dx * np.asarray(ref_points)[None, :]


@dataclass
class SolutionCoefficients:
    """Modal coefficients plus the time they represent."""

    q: np.ndarray   # (m_elem, MC, m_eqn)
    t: float

    @property
    def m_elem(self):
        return self.q.shape[0]

    @property
    def order(self):
        return self.q.shape[1]

    @property
    def m_eqn(self):
        return self.q.shape[2]

    def means(self):
        return self.q[:, 0, :]

    def copy(self):
        return SolutionCoefficients(self.q.copy(), self.t)


@dataclass(frozen=True)
class TimeStepContext:
    """One accepted step size and derived ratios."""

    dt: float
    nu: float          # dt / dx
    cfl: float         # realized |lambda|_max * dt / dx
    max_speed: float


def l2_project(fn, mesh, order, m_eqn, t=0.0):
    """L2-project x -> q(x) onto the modal basis, elementwise Gauss quadrature.

    `fn` maps an array of coordinates (..., ) to states (..., m_eqn).
    """
    rule = gauss_legendre(order)
    x = mesh.nodes(rule.nodes)                       # (m_elem, MO)
    vals = np.asarray(fn(x), dtype=float)
    if vals.shape != x.shape + (m_eqn,):
        raise ValueError(f"initial data returned shape {vals.shape}, expected {x.shape + (m_eqn,)}")
    phi = legendre_phi(rule.nodes, order)            # (MO, MC)
    q = 0.5 * np.einsum("a,ak,iae->ike", rule.weights, phi, vals)
    return SolutionCoefficients(q, float(t))


def compute_dt(sys, state, mesh, cfl, t_remaining):
    """Largest stable step: cfl * dx / max wave speed, clipped to t_remaining.

    The wave-speed bound is pointwise (solution evaluated at the positivity
    control points, which include both element edges): cell means alone
    under-estimate the bound once strong gradients appear, silently running
    the scheme past the stability boundary.
    """
    if t_remaining < 0.0:
        raise SolverError(f"negative remaining time {t_remaining!r}")
    if state.order > 1:
        phi_pos = basis_tables(state.order).phi_pos
        pts = np.einsum("pk,ike->ipe", phi_pos, state.q)
        speeds = models.spectral_radius(sys, pts)
    else:
        speeds = models.spectral_radius(sys, state.means())
    max_speed = float(np.max(speeds)) if speeds.size else 0.0
    if max_speed <= 0.0:
        dt = t_remaining
    else:
        dt = min(cfl * mesh.dx / max_speed, t_remaining)
    if not np.isfinite(dt) or dt < 0.0:
        raise SolverError(f"invalid time step {dt!r}")
    nu = dt / mesh.dx
    return TimeStepContext(dt=dt, nu=nu, cfl=max_speed * nu, max_speed=max_speed)


def ghost_coefficients(state, bc):
    """Ghost-element coefficient matrices (left, right) for the given boundary."""
    if bc is BoundaryCondition.PERIODIC:
        return state.q[-1].copy(), state.q[0].copy()
    return state.q[0].copy(), state.q[-1].copy()


def extend_with_ghosts(arr, bc):
    """Stack ghost entries around axis 0: periodic wrap or outflow edge copy."""
    if bc is BoundaryCondition.PERIODIC:
        return np.concatenate([arr[-1:], arr, arr[:1]], axis=0)
    return np.concatenate([arr[:1], arr, arr[-1:]], axis=0)


def relative_l2_error(state, exact_fn, mesh):
    """Modal relative L2 mismatch against a reference solution, summed over equations.

    The reference is projected with one extra quadrature point and one extra
    mode; the surplus mode enters only the reference norm, so under-resolution
    of the exact solution is charged to the error.
    """
    order = state.order
    rule = gauss_legendre(order + 1)
    x = mesh.nodes(rule.nodes)
    vals = np.asarray(exact_fn(x), dtype=float)
    phi = legendre_phi(rule.nodes, order + 1)
    q_star = 0.5 * np.einsum("a,ak,iae->ike", rule.weights, phi, vals)  # (m_elem, MC+1, m_eqn)
    total = 0.0
    for e in range(state.m_eqn):
        ref_norm_sq = np.sum(q_star[:, :, e] ** 2)
        if ref_norm_sq <= 0.0:
            raise SolverError(f"reference solution for equation {e + 1} has zero norm")
        diff_sq = np.sum((state.q[:, :, e] - q_star[:, :order, e]) ** 2)
        diff_sq += np.sum(q_star[:, order, e] ** 2)
        total += np.sqrt(diff_sq / ref_norm_sq)
    return total


def sample_solution(state, mesh, points_per_element):
    """Evaluate the modal solution on an even subgrid of each element.

    Reference points xi_j = -1 + (2j-1)/ppe, j = 1..ppe; returns (x, values)
    with shapes (m_elem*ppe,) and (m_elem*ppe, m_eqn).
    """
    ppe = int(points_per_element)
    if ppe < 1:
        raise ValueError("points_per_element must be >= 1")
    j = np.arange(1, ppe + 1)
    xi = -1.0 + (2.0 * j - 1.0) / ppe
    x = mesh.nodes(xi)                                   # (m_elem, ppe)
    phi = legendre_phi(xi, state.order)                  # (ppe, MC)
    vals = np.einsum("pk,ike->ipe", phi, state.q)        # (m_elem, ppe, m_eqn)
    return x.reshape(-1), vals.reshape(-1, state.m_eqn)


def format_float(v):
    """17 significant digits: round-trips every double, stays deterministic."""
    return f"{float(v):.17g}"


def write_csv(path, header, columns):
    """Write columns (equal-length 1D arrays) as CSV with LF endings."""
    cols = [np.asarray(c, dtype=float).reshape(-1) for c in columns]
    n = cols[0].size
    if any(c.size != n for c in cols):
        raise ValueError("CSV columns must have equal length")
    if len(header) != len(cols):
        raise ValueError("CSV header width must match column count")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in range(n):
            fh.write(",".join(format_float(c[row]) for c in cols) + "\n")


def write_solution_csv(path, state, mesh, points_per_element):
    """Header x,q1[,q2[,q3]], one row per sample point, conservative variables."""
    x, vals = sample_solution(state, mesh, points_per_element)
    header = ["x"] + [f"q{e + 1}" for e in range(state.m_eqn)]
    write_csv(path, header, [x] + [vals[:, e] for e in range(state.m_eqn)])
