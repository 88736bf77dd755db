"""Run orchestration: flat key=value configs, named problems, CSV emission.

Config files are plain text, one `key=value` per line; `#` starts a comment
and blank lines are skipped.  Keys match the config fields one-to-one; the
four limiter toggles are the keys prediction, mean_flux, pointwise,
oscillation.  `--set key=value` overrides apply after the file, left to
right.  The summary printed on stdout is a single JSON line with sorted
keys; all file output goes through the deterministic CSV writers.

Exit codes: 0 success, 2 config error, 3 numerical failure.
"""

import argparse
import dataclasses
import json
import math
import sys as _pysys

import numpy as np

from . import models, verification
from .basis import basis_tables
from .corrector import LimiterToggles, step
from .errors import ConfigError, DomainError, LxwdgError, PositivityError, SolverError
from .mesh_state import (
    BoundaryCondition,
    Mesh,
    compute_dt,
    l2_project,
    relative_l2_error,
    sample_solution,
    write_csv,
    write_solution_csv,
)
from .predictor import build_picard_operator

# stable run values per order, slightly inside the linear stability boundary
DEFAULT_CFL = {1: 0.90, 2: 0.30, 3: 0.14, 4: 0.10, 5: 0.06}

_EQUATIONS = ("burgers", "shallow_water", "euler")
_TOGGLE_KEYS = ("prediction", "mean_flux", "pointwise", "oscillation")
_COMMON_KEYS = {
    "cfl", "eps", "osc_eps", "g", "gamma", "output_path", "threads",
    *_TOGGLE_KEYS,
}
_RUN_KEYS = _COMMON_KEYS | {
    "equation", "order", "m_elem", "x_low", "x_high", "bc", "t_final", "ic",
    "points_per_element",
}
_CONV_KEYS = _COMMON_KEYS | {"equation", "orders", "n_list"}
_RIEMANN_KEYS = _COMMON_KEYS | {
    "case", "order", "m_elem", "t_final", "x_low", "x_high",
    "points_per_element", "left", "right",
}


# ------------------------------------------------------------------ config


def load_config(path):
    """Read a flat key=value file into a dict (later duplicates win)."""
    kv = {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path!r}: {exc}") from exc
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, value = line.split("=", 1)
        kv[key.strip()] = value.strip()
    return kv


def apply_overrides(kv, pairs):
    for item in pairs:
        if "=" not in item:
            raise ConfigError(f"--set needs key=value, got {item!r}")
        key, value = item.split("=", 1)
        kv[key.strip()] = value.strip()
    return kv


def _reject_unknown(kv, allowed, command):
    unknown = sorted(set(kv) - allowed)
    if unknown:
        raise ConfigError(
            f"unknown config key(s) for {command}: {', '.join(unknown)}"
        )


def _require(kv, key):
    if key not in kv:
        raise ConfigError(f"missing required config key {key!r}")
    return kv[key]


def _as_int(kv, key, default=None, low=None, high=None):
    raw = kv.get(key, default)
    if raw is None:
        raw = _require(kv, key)
    try:
        value = int(str(raw))
    except ValueError:
        raise ConfigError(f"{key} must be an integer (got {raw!r})") from None
    if low is not None and value < low:
        raise ConfigError(f"{key} must be >= {low} (got {value})")
    if high is not None and value > high:
        raise ConfigError(f"{key} must be <= {high} (got {value})")
    return value


def _as_float(kv, key, default=None, minimum=None, strict_min=None):
    raw = kv.get(key, default)
    if raw is None:
        raw = _require(kv, key)
    try:
        value = float(str(raw))
    except ValueError:
        raise ConfigError(f"{key} must be a number (got {raw!r})") from None
    if not math.isfinite(value):
        raise ConfigError(f"{key} must be finite (got {value})")
    if minimum is not None and value < minimum:
        raise ConfigError(f"{key} must be >= {minimum} (got {value})")
    if strict_min is not None and value <= strict_min:
        raise ConfigError(f"{key} must be > {strict_min} (got {value})")
    return value


def _as_choice(kv, key, options, default=None):
    raw = kv.get(key, default)
    if raw is None:
        raw = _require(kv, key)
    value = str(raw)
    if value not in options:
        raise ConfigError(
            f"{key} must be one of {', '.join(options)} (got {value!r})"
        )
    return value


def _as_bool(kv, key, default):
    raw = kv.get(key)
    if raw is None:
        return default
    lowered = str(raw).strip().lower()
    if lowered in ("on", "true", "1", "yes"):
        return True
    if lowered in ("off", "false", "0", "no"):
        return False
    raise ConfigError(f"{key} must be on/off (got {raw!r})")


def _as_int_list(kv, key):
    raw = _require(kv, key)
    items = [s for s in str(raw).replace(",", " ").split() if s]
    if not items:
        raise ConfigError(f"{key} must list at least one integer")
    out = []
    for item in items:
        try:
            out.append(int(item))
        except ValueError:
            raise ConfigError(f"{key} entries must be integers (got {item!r})") from None
    return out


def _as_float_list(kv, key, length):
    raw = _require(kv, key)
    items = [s for s in str(raw).replace(",", " ").split() if s]
    if len(items) != length:
        raise ConfigError(f"{key} must list {length} numbers (got {len(items)})")
    try:
        return np.array([float(s) for s in items])
    except ValueError:
        raise ConfigError(f"{key} entries must be numbers (got {raw!r})") from None


def _toggles(kv, oscillation_default=True):
    return LimiterToggles(
        prediction=_as_bool(kv, "prediction", True),
        mean_flux=_as_bool(kv, "mean_flux", True),
        pointwise=_as_bool(kv, "pointwise", True),
        oscillation=_as_bool(kv, "oscillation", oscillation_default),
    )


def _numerics(kv, order):
    cfl = _as_float(kv, "cfl", DEFAULT_CFL[order], strict_min=0.0)
    eps = _as_float(kv, "eps", 1e-14, strict_min=0.0)
    osc_eps = _as_float(kv, "osc_eps", eps, minimum=0.0)
    # accepted for config compatibility; execution is always serial
    _as_int(kv, "threads", 1, low=1)
    return cfl, eps, osc_eps


def _build_system(equation, kv):
    if equation == "burgers":
        return models.burgers()
    if equation == "shallow_water":
        return models.shallow_water(_as_float(kv, "g", 1.0, strict_min=0.0))
    return models.euler(_as_float(kv, "gamma", 1.4, strict_min=1.0))


# ------------------------------------------------------------------ named data


@dataclasses.dataclass(frozen=True)
class _NamedIc:
    equation: str
    build: object           # (system, config kv already validated) -> q0(x)
    odd_m_elem: bool = False


def _piecewise(system, w_left, w_right):
    q_l = models.prim_to_cons(system, np.asarray(w_left, dtype=float))
    q_r = models.prim_to_cons(system, np.asarray(w_right, dtype=float))

    def q0(x):
        return np.where(x[..., None] < 0.0, q_l, q_r)

    return q0


def _ic_burgers_sine(system, cfg):
    return lambda x: np.sin(2.0 * np.pi * x)[..., None]


def _ic_sw_gaussian(system, cfg):
    def q0(x):
        h = 1.0 + np.exp(-100.0 * x * x)
        return np.stack([h, np.zeros_like(h)], axis=-1)

    return q0


def _ic_sw_dambreak(system, cfg):
    return _piecewise(system, [1.0, 0.0], [0.1, 0.0])


def _ic_sw_double_rarefaction(system, cfg):
    return _piecewise(system, [1.0, -2.0], [1.0, 2.0])


def _euler_advection_exact(system, t, x):
    rho = 1.0 + 0.5 * np.sin(3.0 * np.pi * (x - 0.5 * t))
    w = np.stack([rho, np.full_like(x, 0.5), np.full_like(x, 0.75)], axis=-1)
    return models.prim_to_cons(system, w)


def _ic_euler_advection(system, cfg):
    return lambda x: _euler_advection_exact(system, 0.0, x)


def _ic_euler_sod(system, cfg):
    return _piecewise(system, [1.0, 0.0, 1.0], [0.125, 0.0, 0.1])


def _ic_euler_double_rarefaction(system, cfg):
    return _piecewise(system, [7.0, -1.0, 0.2], [7.0, 1.0, 0.2])


def _ic_euler_sedov(system, cfg):
    # pressure spike confined to the element centered at x=0; the jump sits
    # exactly on element faces, so the L2 projection is exact per element
    gamma, = system.params
    dx = cfg["dx"]
    p_high = (gamma - 1.0) * 3.2e6 / dx
    p_low = (gamma - 1.0) * 1e-12

    def q0(x):
        p = np.where(np.abs(x) <= 0.5 * dx, p_high, p_low)
        w = np.stack([np.ones_like(x), np.zeros_like(x), p], axis=-1)
        return models.prim_to_cons(system, w)

    return q0


def _ic_sw_forced(system, cfg):
    return lambda x: verification.forced_shallow_water_conservative(0.0, x)


NAMED_ICS = {
    "burgers_sine": _NamedIc("burgers", _ic_burgers_sine),
    "sw_gaussian": _NamedIc("shallow_water", _ic_sw_gaussian),
    "sw_dambreak": _NamedIc("shallow_water", _ic_sw_dambreak),
    "sw_double_rarefaction": _NamedIc("shallow_water", _ic_sw_double_rarefaction),
    "sw_forced": _NamedIc("shallow_water", _ic_sw_forced),
    "euler_advection": _NamedIc("euler", _ic_euler_advection),
    "euler_sod": _NamedIc("euler", _ic_euler_sod),
    "euler_double_rarefaction": _NamedIc("euler", _ic_euler_double_rarefaction),
    "euler_sedov": _NamedIc("euler", _ic_euler_sedov, odd_m_elem=True),
}

# sw_forced carries the manufactured source with it
_IC_SOURCES = {"sw_forced": verification.forced_shallow_water_source}

RIEMANN_CASES = {
    "sw_dambreak": ("shallow_water", [1.0, 0.0], [0.1, 0.0]),
    "sw_double_rarefaction": ("shallow_water", [1.0, -2.0], [1.0, 2.0]),
    "euler_sod": ("euler", [1.0, 0.0, 1.0], [0.125, 0.0, 0.1]),
    "euler_double_rarefaction": ("euler", [7.0, -1.0, 0.2], [7.0, 1.0, 0.2]),
}


# ------------------------------------------------------------------ stepping


def _positivity_names(system):
    return tuple(system.prim_names[i - 1] for i in system.positivity_indices)


def _state_positivity(system, tables, state):
    mean_vals = models.pointwise_positivity_values(system, state.q[:, 0, :])
    pts = np.einsum("pk,ike->ipe", tables.phi_pos, state.q)
    point_vals = models.pointwise_positivity_values(system, pts)
    if mean_vals.shape[-1] == 0:
        return np.empty(0), np.empty(0)
    return mean_vals.min(axis=0), point_vals.min(axis=(0, 1))


def integrate(system, state, mesh, bc, order, cfl, t_final, eps, osc_eps,
              toggles, source=None):
    """March state to t_final; returns (state, summary dict of the run)."""
    op = build_picard_operator(order)
    tables = basis_tables(order)
    counters = {
        "n_prediction_limited": 0,
        "n_blended_faces": 0,
        "n_pointwise_density": 0,
        "n_pointwise_pressure": 0,
        "n_oscillation_limited": 0,
    }
    min_mean, min_point = _state_positivity(system, tables, state)
    steps = 0
    # strict remaining-time guard so t_final=0 performs no steps
    while t_final - state.t > 1e-13 * max(1.0, abs(t_final)):
        ctx = compute_dt(system, state, mesh, cfl, t_final - state.t)
        state, stats = step(op, system, state, mesh, bc, ctx, eps, toggles,
                            source=source, osc_eps=osc_eps)
        steps += 1
        for key in counters:
            counters[key] += getattr(stats, key)
        min_mean = np.minimum(min_mean, stats.min_mean_positivity)
        min_point = np.minimum(min_point, stats.min_point_positivity)
    names = _positivity_names(system)
    summary = {
        "t_final": state.t,
        "steps": steps,
        **counters,
        "min_mean_positivity": {n: float(v) for n, v in zip(names, min_mean)},
        "min_point_positivity": {n: float(v) for n, v in zip(names, min_point)},
    }
    return state, summary


# ------------------------------------------------------------------ commands


def run_command(kv):
    _reject_unknown(kv, _RUN_KEYS, "run")
    equation = _as_choice(kv, "equation", _EQUATIONS)
    ic_name = _as_choice(kv, "ic", tuple(sorted(NAMED_ICS)))
    ic = NAMED_ICS[ic_name]
    if ic.equation != equation:
        raise ConfigError(
            f"ic {ic_name!r} belongs to equation {ic.equation!r} "
            f"(config says {equation!r})"
        )
    order = _as_int(kv, "order", low=1, high=5)
    m_elem = _as_int(kv, "m_elem", low=1)
    if ic.odd_m_elem and m_elem % 2 == 0:
        raise ConfigError(f"ic {ic_name!r} needs an odd m_elem (got {m_elem})")
    x_low = _as_float(kv, "x_low")
    x_high = _as_float(kv, "x_high")
    if not x_high > x_low:
        raise ConfigError(f"x_high must exceed x_low (got {x_low} .. {x_high})")
    bc = BoundaryCondition.parse(_as_choice(kv, "bc", ("periodic", "outflow")))
    t_final = _as_float(kv, "t_final", minimum=0.0)
    ppe = _as_int(kv, "points_per_element", 4, low=1)
    cfl, eps, osc_eps = _numerics(kv, order)
    toggles = _toggles(kv)
    system = _build_system(equation, kv)

    mesh = Mesh(x_low, x_high, m_elem)
    q0 = ic.build(system, {"dx": mesh.dx})
    source = _IC_SOURCES.get(ic_name)
    state = l2_project(q0, mesh, order, system.m_eqn)
    state, summary = integrate(system, state, mesh, bc, order, cfl, t_final,
                               eps, osc_eps, toggles, source=source)
    output_path = kv.get("output_path")
    if output_path:
        write_solution_csv(output_path, state, mesh, ppe)
    summary.update(command="run", equation=equation, ic=ic_name, order=order,
                   m_elem=m_elem, output_path=output_path)
    return state, mesh, summary


_CONV_PROBLEMS = ("forced_shallow_water", "euler_advection")


def convergence_command(kv):
    _reject_unknown(kv, _CONV_KEYS, "convergence")
    problem = _as_choice(kv, "equation", _CONV_PROBLEMS)
    orders = _as_int_list(kv, "orders")
    for mo in orders:
        if not 1 <= mo <= 5:
            raise ConfigError(f"orders entries must be in 1..5 (got {mo})")
    n_list = _as_int_list(kv, "n_list")
    for n in n_list:
        if n < 1:
            raise ConfigError(f"n_list entries must be positive (got {n})")
    # the tables are produced with the positivity limiters on and the
    # oscillation limiter off; it flattens smooth extrema on coarse grids
    toggles = _toggles(kv, oscillation_default=False)

    if problem == "forced_shallow_water":
        system = _build_system("shallow_water", kv)
        exact = verification.forced_shallow_water_conservative
        source = verification.forced_shallow_water_source
        t_final = 0.5
    else:
        system = _build_system("euler", kv)
        exact = lambda t, x: _euler_advection_exact(system, t, x)
        source = None
        t_final = 1.0

    col_order, col_n, col_err, col_rate = [], [], [], []
    final_errors, final_rates = {}, {}
    for mo in orders:
        cfl, eps, osc_eps = _numerics(kv, mo)
        prev = None
        for n in n_list:
            mesh = Mesh(-1.0, 1.0, n)
            state = l2_project(lambda x: exact(0.0, x), mesh, mo, system.m_eqn)
            state, _ = integrate(system, state, mesh, BoundaryCondition.PERIODIC,
                                 mo, cfl, t_final, eps, osc_eps, toggles,
                                 source=source)
            err = relative_l2_error(state, lambda x: exact(t_final, x), mesh)
            rate = math.nan if prev is None else math.log2(prev / err)
            col_order.append(mo)
            col_n.append(n)
            col_err.append(err)
            col_rate.append(rate)
            prev = err
        final_errors[str(mo)] = err
        final_rates[str(mo)] = rate
    output_path = kv.get("output_path")
    if output_path:
        write_csv(output_path, ["order", "n", "e_n", "rate"],
                  [col_order, col_n, col_err, col_rate])
    summary = {
        "command": "convergence",
        "equation": problem,
        "orders": orders,
        "n_list": n_list,
        "final_errors": final_errors,
        "final_rates": final_rates,
        "output_path": output_path,
    }
    return summary


def riemann_command(kv):
    _reject_unknown(kv, _RIEMANN_KEYS, "riemann")
    case = _as_choice(kv, "case", tuple(sorted(RIEMANN_CASES)))
    equation, w_left, w_right = RIEMANN_CASES[case]
    order = _as_int(kv, "order", low=1, high=5)
    m_elem = _as_int(kv, "m_elem", low=1)
    t_final = _as_float(kv, "t_final", minimum=0.0)
    x_low = _as_float(kv, "x_low", -1.0)
    x_high = _as_float(kv, "x_high", 1.0)
    if not x_high > x_low:
        raise ConfigError(f"x_high must exceed x_low (got {x_low} .. {x_high})")
    ppe = _as_int(kv, "points_per_element", 4, low=1)
    cfl, eps, osc_eps = _numerics(kv, order)
    toggles = _toggles(kv)
    system = _build_system(equation, kv)
    if "left" in kv:
        w_left = _as_float_list(kv, "left", system.m_eqn)
    if "right" in kv:
        w_right = _as_float_list(kv, "right", system.m_eqn)
    w_left = np.asarray(w_left, dtype=float)
    w_right = np.asarray(w_right, dtype=float)

    exact = verification.riemann_solution(system, w_left, w_right)
    q0 = _piecewise(system, w_left, w_right)
    mesh = Mesh(x_low, x_high, m_elem)
    state = l2_project(q0, mesh, order, system.m_eqn)
    state, summary = integrate(system, state, mesh, BoundaryCondition.OUTFLOW,
                               order, cfl, t_final, eps, osc_eps, toggles)

    if t_final > 0.0:
        exact_prim = lambda x: exact.sample_primitive(x / t_final)
        exact_cons = lambda x: exact.sample_conservative(x / t_final)
    else:
        exact_prim = lambda x: np.where(x[..., None] < 0.0, w_left, w_right)
        exact_cons = q0
    l1_error = verification.l1_error_vs_reference(state, mesh, exact_cons)

    output_path = kv.get("output_path")
    if output_path:
        x, vals = sample_solution(state, mesh, ppe)
        prim = models.cons_to_prim(system, vals)
        ref = exact_prim(x)
        header = ["x", *system.prim_names,
                  *(f"{name}_exact" for name in system.prim_names)]
        columns = [x] + [prim[:, e] for e in range(system.m_eqn)] \
                      + [ref[:, e] for e in range(system.m_eqn)]
        write_csv(output_path, header, columns)
    summary.update(command="riemann", case=case, equation=equation,
                   order=order, m_elem=m_elem, l1_error=l1_error,
                   has_vacuum=exact.has_vacuum, output_path=output_path)
    return summary


# ------------------------------------------------------------------ entry


def _parse_args(argv):
    parser = argparse.ArgumentParser(
        prog="lxwdg",
        description="Lax-Wendroff DG solver for 1D hyperbolic conservation laws",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in (
        ("run", "integrate a named initial condition and write sampled output"),
        ("convergence", "run a refinement sequence and tabulate L2 errors"),
        ("riemann", "run a Riemann case and compare against the exact solution"),
    ):
        cmd = sub.add_parser(name, help=text)
        cmd.add_argument("--config", help="flat key=value config file")
        cmd.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                         help="override one config key (repeatable)")
    return parser.parse_args(argv)


def main(argv=None):
    args = _parse_args(argv)
    try:
        kv = load_config(args.config) if args.config else {}
        apply_overrides(kv, args.set)
        if args.command == "run":
            _, _, summary = run_command(kv)
        elif args.command == "convergence":
            summary = convergence_command(kv)
        else:
            summary = riemann_command(kv)
    except ConfigError as exc:
        print(f"config error: {exc}", file=_pysys.stderr)
        return 2
    except (PositivityError, DomainError, SolverError) as exc:
        print(f"numerical failure [{type(exc).__name__}]: {exc}",
              file=_pysys.stderr)
        return 3
    print(json.dumps(summary, sort_keys=True))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
