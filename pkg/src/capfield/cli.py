"""Command-line surface for cap equilibria.

Every run writes a JSON summary with a fixed key set {alpha0, FQ, mass,
residuals, method, timings} plus command-specific extras, and density
commands can emit a CSV table.  Identical configurations produce
byte-identical outputs: timings stay empty unless --timings is passed,
floats are printed with 17 significant digits, and files use LF line
endings.  Exit codes: 0 success, 2 validation or pin mismatch, 3
numerical nonconvergence.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from ._numerics import ordered_map
from .equilibrium import DensityProfile, capacity_south_cap, density_general
from .fields import (
    ExternalField,
    PointChargeField,
    QuadraticField,
    TabulatedField,
    ZeroField,
)
from .geometry import boundary_clustered_grid, south_cap
from .oracle import discrete_energy_minimize, nystrom_solve, ring_energy_system
from .potential import potential_on_sphere, verify_equilibrium
from .singular_quadrature import NonconvergenceError
from .support_finder import (
    ffunctional_numeric,
    ffunctional_pointcharge,
    ffunctional_quadratic,
    gonchar_heights,
    minimize_ffunctional,
    solve_support_northpole,
    solve_support_pointcharge,
    solve_support_quadratic,
)

PI = math.pi

# failing operation named in validation messages, per command
_OP_NAMES = {
    "capacity": "equilibrium.capacity_south_cap",
    "support": "support_finder.solve_support",
    "density": "equilibrium.density_general",
    "ffunctional": "support_finder.ffunctional",
    "verify": "potential.verify_equilibrium",
    "oracle": "oracle.nystrom_solve / oracle.discrete_energy_minimize",
    "gonchar": "support_finder.gonchar_heights",
}

# absolute tolerance applied to every numeric leaf when comparing a run
# against its pinned golden summary
_PIN_TOLERANCES = {
    "capacity": 1e-12,
    "support": 1e-9,
    "density": 1e-7,
    "ffunctional": 1e-9,
    "verify": 1e-6,
    "oracle": 1e-7,
    "gonchar": 1e-10,
}


@dataclass(frozen=True)
class RunConfig:
    """Parsed invocation: one command plus its field, sizes and sinks."""

    command: str
    field_kind: str = "zero"
    q: float = 1.0
    h: float = 2.0
    a: Optional[float] = None
    b: Optional[float] = None
    c: Optional[float] = None
    table: Optional[str] = None
    alpha: Optional[float] = None
    n: int = 64
    rings: int = 64
    iterations: int = 20000
    tol: float = 1e-4
    mode: str = "nystrom"
    csv_path: Optional[str] = None
    json_path: Optional[str] = None
    pin_path: Optional[str] = None
    timings_enabled: bool = False


def build_field(config: RunConfig) -> ExternalField:
    kind = config.field_kind
    if kind == "zero":
        return ZeroField()
    if kind == "point-charge":
        return PointChargeField(config.q, config.h)
    if kind == "north-pole":
        return PointChargeField(config.q, 1.0)
    if kind == "quadratic":
        if None in (config.a, config.b, config.c):
            raise ValueError("quadratic field needs --a, --b and --c")
        return QuadraticField(config.a, config.b, config.c)
    if kind == "tabulated":
        if config.table is None:
            raise ValueError("tabulated field needs --table")
        return TabulatedField.from_csv(config.table)
    raise ValueError(f"unknown field kind {kind!r}")


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def emit_density_table(profile: DensityProfile, field: ExternalField, path) -> Path:
    """Write the density table for a profile: phi, f, Q, U, U+Q per node.

    One row per grid node, 17 significant digits, LF endings; rerunning
    with the same profile and field is byte-identical.
    """
    path = Path(path)
    nodes = np.asarray(profile.grid.nodes)
    f = np.asarray(profile.values)
    q = np.asarray(field.value_at_x3(np.clip(np.cos(nodes), -1.0, 1.0)))
    u = np.array(ordered_map(lambda p: potential_on_sphere(profile, float(p)), nodes))
    try:
        with open(path, "w", newline="") as fh:
            fh.write("phi,f,Q,U,weighted_potential\n")
            for row in zip(nodes, f, q, u, u + q):
                fh.write(",".join(_fmt(v) for v in row) + "\n")
    except OSError as err:
        raise OSError(f"cannot write density table {path}: {err}") from err
    return path


def _require_alpha(config: RunConfig) -> float:
    if config.alpha is None:
        raise ValueError("this command needs --alpha (radians)")
    return config.alpha


def _solve_support(config: RunConfig, field: ExternalField):
    kind = config.field_kind
    if kind == "point-charge":
        return solve_support_pointcharge(config.q, config.h)
    if kind == "north-pole":
        return solve_support_northpole(config.q)
    if kind == "quadratic":
        build_field(config)  # admissibility before searching
        return solve_support_quadratic(config.a, config.b, config.c)
    return minimize_ffunctional(field)


def _cmd_capacity(config: RunConfig):
    alpha = _require_alpha(config)
    value = capacity_south_cap(alpha)
    summary = {
        "alpha0": alpha,
        "FQ": None,
        "mass": None,
        "residuals": {},
        "method": "ClosedForm",
        "capacity": value,
    }
    return summary, _fmt(value)


def _cmd_support(config: RunConfig):
    field = build_field(config)
    solution = _solve_support(config, field)
    summary = {
        "alpha0": solution.alpha0,
        "FQ": solution.robin_constant,
        "mass": None,
        "residuals": {"support_equation": abs(solution.residual)},
        "method": solution.method.value,
        "iterations": solution.iterations,
    }
    return summary, f"alpha0 = {_fmt(solution.alpha0)} ({solution.method.value})"


def _cmd_density(config: RunConfig):
    field = build_field(config)
    if config.alpha is not None:
        alpha = config.alpha
    else:
        alpha = _solve_support(config, field).alpha0
    cap = south_cap(alpha)
    grid = boundary_clustered_grid(cap, config.n)
    profile = density_general(field, cap, grid)
    summary = {
        "alpha0": alpha,
        "FQ": profile.robin_constant,
        "mass": profile.mass,
        "residuals": {"mass_error": abs(profile.mass - 1.0)},
        "method": "TwoStageInversion",
        "negative_nodes": len(profile.negative_nodes),
    }
    if config.csv_path is not None:
        emit_density_table(profile, field, config.csv_path)
        summary["csv"] = str(config.csv_path)
    return summary, f"alpha0 = {_fmt(alpha)}  mass = {_fmt(profile.mass)}"


def _cmd_ffunctional(config: RunConfig):
    field = build_field(config)
    alpha = _require_alpha(config)
    kind = config.field_kind
    if kind == "zero":
        value, method = 1.0 / capacity_south_cap(alpha), "ClosedForm"
    elif kind == "point-charge":
        value, method = ffunctional_pointcharge(config.q, config.h, alpha), "ClosedForm"
    elif kind == "north-pole":
        value, method = ffunctional_pointcharge(config.q, 1.0, alpha), "ClosedForm"
    elif kind == "quadratic":
        value, method = ffunctional_quadratic(config.a, config.b, config.c, alpha), "ClosedForm"
    else:
        value, method = ffunctional_numeric(field, alpha), "Numeric"
    summary = {
        "alpha0": alpha,
        "FQ": None,
        "mass": None,
        "residuals": {},
        "method": method,
        "ffunctional": value,
    }
    return summary, _fmt(value)


def _cmd_verify(config: RunConfig):
    field = build_field(config)
    alpha = _require_alpha(config)
    cap = south_cap(alpha)
    profile = density_general(field, cap, boundary_clustered_grid(cap, config.n))
    report = verify_equilibrium(field, profile, tol=config.tol)
    summary = {
        "alpha0": alpha,
        "FQ": report.robin_constant,
        "mass": profile.mass,
        "residuals": {
            "sup_deviation": report.sup_deviation_on_support,
            "mass_error": report.mass_error,
        },
        "method": "VariationalCheck",
        "verdict": report.verdict,
        "min_slack": report.min_slack_off_support,
        "negative_nodes": report.negative_node_count,
    }
    return summary, f"verdict = {'pass' if report.verdict else 'fail'}"


def _cmd_oracle(config: RunConfig):
    field = build_field(config)
    if config.mode == "nystrom":
        alpha = _require_alpha(config)
        profile, fq = nystrom_solve(field, south_cap(alpha), config.n)
        summary = {
            "alpha0": alpha,
            "FQ": fq,
            "mass": profile.mass,
            "residuals": {"mass_error": abs(profile.mass - 1.0)},
            "method": "NystromCollocation",
        }
        if config.csv_path is not None:
            emit_density_table(profile, field, config.csv_path)
            summary["csv"] = str(config.csv_path)
        return summary, f"FQ = {_fmt(fq)}"

    measure = discrete_energy_minimize(field, config.rings, config.iterations)
    system = ring_energy_system(config.rings)
    weights = np.asarray(measure.weights)
    station = system.interaction @ weights + field.value_at_x3(
        np.clip(np.cos(system.angles), -1.0, 1.0)
    )
    active = weights > 1e-6
    multiplier = float(np.mean(station[active]))
    summary = {
        "alpha0": None,
        "FQ": multiplier,
        "mass": float(weights.sum()),
        "residuals": {
            "kkt_spread": float(station[active].max() - station[active].min()),
        },
        "method": "ProjectedGradient",
        "active_rings": int(np.count_nonzero(active)),
        "first_active_angle": float(system.angles[active][0]),
    }
    return summary, f"FQ = {_fmt(multiplier)}  active rings = {int(np.count_nonzero(active))}"


def _cmd_gonchar(config: RunConfig):
    heights = gonchar_heights(config.q)
    summary = {
        "alpha0": None,
        "FQ": None,
        "mass": None,
        "residuals": {},
        "method": "ClosedForm",
        "h_minus": heights.h_minus,
        "h_plus": heights.h_plus,
    }
    return summary, f"h_minus = {_fmt(heights.h_minus)}  h_plus = {_fmt(heights.h_plus)}"


_HANDLERS = {
    "capacity": _cmd_capacity,
    "support": _cmd_support,
    "density": _cmd_density,
    "ffunctional": _cmd_ffunctional,
    "verify": _cmd_verify,
    "oracle": _cmd_oracle,
    "gonchar": _cmd_gonchar,
}


def _pin_compare(golden, fresh, tol: float, trail: str = "") -> list[str]:
    """Recursive numeric comparison; returns human-readable mismatches."""
    problems = []
    keys = sorted(set(golden) | set(fresh))
    for key in keys:
        where = f"{trail}{key}"
        if key not in golden or key not in fresh:
            problems.append(f"{where}: present on one side only")
            continue
        g, f = golden[key], fresh[key]
        if isinstance(g, dict) and isinstance(f, dict):
            problems.extend(_pin_compare(g, f, tol, where + "."))
        elif isinstance(g, (int, float)) and not isinstance(g, bool) and isinstance(
            f, (int, float)
        ) and not isinstance(f, bool):
            if not abs(float(g) - float(f)) <= tol:
                problems.append(f"{where}: {f!r} differs from pinned {g!r} by more than {tol:g}")
        elif g != f:
            problems.append(f"{where}: {f!r} != pinned {g!r}")
    return problems


def _apply_pin(config: RunConfig, summary: dict) -> int:
    """Golden-file workflow: first run records, later runs must agree."""
    pinnable = {k: v for k, v in summary.items() if k != "timings"}
    path = Path(config.pin_path)
    if not path.exists():
        path.write_text(json.dumps(pinnable, sort_keys=True, indent=2) + "\n")
        print(f"pinned golden summary to {path}", file=sys.stderr)
        return 0
    golden = json.loads(path.read_text())
    problems = _pin_compare(golden, pinnable, _PIN_TOLERANCES[config.command])
    if problems:
        for p in problems:
            print(f"pin mismatch: {p}", file=sys.stderr)
        return 2
    return 0


def run(config: RunConfig) -> int:
    started = time.perf_counter()
    try:
        summary, line = _HANDLERS[config.command](config)
    except ValueError as err:
        print(f"validation error in {_OP_NAMES[config.command]}: {err}", file=sys.stderr)
        return 2
    except OSError as err:
        print(str(err), file=sys.stderr)
        return 2
    except NonconvergenceError as err:
        print(f"nonconvergence in {_OP_NAMES[config.command]}: {err}", file=sys.stderr)
        return 3

    summary["timings"] = (
        {"total_s": time.perf_counter() - started} if config.timings_enabled else {}
    )
    status = 0
    if config.pin_path is not None:
        status = _apply_pin(config, summary)

    payload = json.dumps(summary, sort_keys=True, indent=2, allow_nan=False) + "\n"
    print(line)
    if config.json_path is not None:
        try:
            Path(config.json_path).write_text(payload)
        except OSError as err:
            print(f"cannot write summary {config.json_path}: {err}", file=sys.stderr)
            return 2
    else:
        sys.stdout.write(payload)
    return status


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="capfield",
        description="Weighted equilibrium measures on spherical caps.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    output = argparse.ArgumentParser(add_help=False)
    output.add_argument("--json", dest="json_path", metavar="PATH",
                        help="write the JSON summary here instead of stdout")
    output.add_argument("--pin", dest="pin_path", metavar="PATH",
                        help="golden summary: first run writes, later runs compare")
    output.add_argument("--timings", dest="timings_enabled", action="store_true",
                        help="include wall timings (breaks byte determinism)")

    fieldp = argparse.ArgumentParser(add_help=False)
    fieldp.add_argument("--field", dest="field_kind", default="zero",
                        choices=["zero", "point-charge", "north-pole", "quadratic", "tabulated"])
    fieldp.add_argument("--q", type=float, default=1.0, help="charge (point-charge, north-pole)")
    fieldp.add_argument("--h", type=float, default=2.0, help="charge height (point-charge)")
    fieldp.add_argument("--a", type=float, help="quadratic coefficient of x3^2")
    fieldp.add_argument("--b", type=float, help="quadratic coefficient of x3")
    fieldp.add_argument("--c", type=float, help="quadratic constant term")
    fieldp.add_argument("--table", help="CSV of (x3, Q) samples for --field tabulated")

    p = sub.add_parser("capacity", parents=[output], help="capacity of a south cap")
    p.add_argument("--alpha", type=float, required=True, help="rim angle, radians")

    sub.add_parser("support", parents=[output, fieldp], help="support rim angle")

    p = sub.add_parser("density", parents=[output, fieldp], help="equilibrium density table")
    p.add_argument("--alpha", type=float, help="rim angle; solved from the field when omitted")
    p.add_argument("--n", type=int, default=64, help="grid nodes")
    p.add_argument("--csv", dest="csv_path", metavar="PATH", help="density table sink")

    p = sub.add_parser("ffunctional", parents=[output, fieldp], help="cap functional value")
    p.add_argument("--alpha", type=float, required=True, help="rim angle, radians")

    p = sub.add_parser("verify", parents=[output, fieldp], help="variational check of a triple")
    p.add_argument("--alpha", type=float, required=True, help="support rim angle, radians")
    p.add_argument("--n", type=int, default=64, help="grid nodes")
    p.add_argument("--tol", type=float, default=1e-4, help="verification tolerance")

    p = sub.add_parser("oracle", parents=[output, fieldp], help="independent solvers")
    p.add_argument("--mode", choices=["nystrom", "energy"], default="nystrom")
    p.add_argument("--alpha", type=float, help="cap rim angle (nystrom mode)")
    p.add_argument("--n", type=int, default=64, help="collocation nodes (nystrom mode)")
    p.add_argument("--rings", type=int, default=64, help="latitude rings (energy mode)")
    p.add_argument("--iterations", type=int, default=20000, help="gradient iterations")
    p.add_argument("--csv", dest="csv_path", metavar="PATH", help="density table sink")

    p = sub.add_parser("gonchar", parents=[output], help="critical charge heights")
    p.add_argument("--q", type=float, required=True, help="charge")

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        namespace = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code else 0
    known = RunConfig.__dataclass_fields__
    config = RunConfig(**{k: v for k, v in vars(namespace).items() if k in known})
    return run(config)


if __name__ == "__main__":
    sys.exit(main())
