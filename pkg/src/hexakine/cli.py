"""``hexakine`` command-line entry point.

Exit codes: 0 ok, 2 usage/config error, 3 G-code parse error, 4 workspace
violation, 5 numerical failure. Errors are printed to stderr as one JSON line.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__
from .drive import DriveConfig, emit, write_frames
from .errors import (
    ConfigError,
    GCodeError,
    GeometryError,
    HexakineError,
    NoConvergence,
    RailOverrun,
    SingularPose,
    Unreachable,
    WorkspaceViolation,
)
from .gcode import parse_program
from .geometry import MachineGeometry, load_geometry
from .kinematics import describe_mobility, inverse_kinematics, solve_forward_kinematics
from .planner import PlannerConfig, plan, read_trajectory, resample, trajectory_csv, verify, write_trajectory
from .plot import render_svg

GEOMETRY_ENV = "HEXAKINE_GEOMETRY"

EXIT_OK, EXIT_USAGE, EXIT_PARSE, EXIT_WORKSPACE, EXIT_NUMERIC = 0, 2, 3, 4, 5


class UsageError(Exception):
    pass


def _exit_code(exc: Exception) -> int:
    if isinstance(exc, GCodeError):
        return EXIT_PARSE
    if isinstance(exc, (WorkspaceViolation, Unreachable, RailOverrun)):
        return EXIT_WORKSPACE
    if isinstance(exc, (NoConvergence, SingularPose)):
        return EXIT_NUMERIC
    return EXIT_USAGE


def _diagnostic(exc: Exception) -> str:
    kind = getattr(exc, "kind", type(exc).__name__)
    payload = {"error": kind, "message": str(exc)}
    if isinstance(exc, HexakineError):
        payload.update(exc.details())
    return json.dumps(payload, sort_keys=True)


def _floats(text: str, n: int, what: str) -> list[float]:
    try:
        vals = [float(v) for v in text.replace(" ", "").split(",")]
    except ValueError:
        raise UsageError(f"{what} must be {n} comma-separated numbers") from None
    if len(vals) != n:
        raise UsageError(f"{what} must be {n} comma-separated numbers, got {len(vals)}")
    return vals


def _overrides(items: list[str]) -> dict[str, str]:
    out = {}
    for item in items or []:
        key, sep, value = item.partition("=")
        if not sep or not key:
            raise UsageError(f"--set expects key=value, got {item!r}")
        out[key.strip()] = value.strip()
    return out


def _split_overrides(items):
    planner_keys = set(PlannerConfig.__dataclass_fields__)
    drive_keys = set(DriveConfig.__dataclass_fields__)
    ov = _overrides(items)
    unknown = set(ov) - planner_keys - drive_keys
    if unknown:
        raise ConfigError(f"unknown setting {sorted(unknown)[0]!r}")
    pc = PlannerConfig().with_overrides({k: v for k, v in ov.items() if k in planner_keys})
    dc = DriveConfig().with_overrides({k: v for k, v in ov.items() if k in drive_keys})
    return pc, dc


def _geometry(args) -> MachineGeometry:
    path = args.geometry or os.environ.get(GEOMETRY_ENV)
    if not path:
        raise UsageError(f"a geometry file is required (--geometry or ${GEOMETRY_ENV})")
    return load_geometry(path)


def _fmt(v: float) -> str:
    s = f"{v:.9g}"
    return "0" if s == "-0" else s


def _write_text(text: str, output: str | None) -> None:
    if output:
        Path(output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def cmd_dof(args) -> int:
    print(describe_mobility())
    return EXIT_OK


def cmd_ik(args) -> int:
    geom = _geometry(args)
    q = inverse_kinematics(geom, _floats(args.pose, 6, "--pose"))
    print(" ".join(_fmt(v) for v in q))
    return EXIT_OK


def cmd_fk(args) -> int:
    geom = _geometry(args)
    q = _floats(args.joints, 6, "--joints")
    guess = _floats(args.guess, 6, "--guess") if args.guess else None
    res = solve_forward_kinematics(geom, q, guess)
    print(" ".join(_fmt(v) for v in res.pose.as_array()))
    return EXIT_OK


def _load_program(path: str):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc}") from exc
    return parse_program(text)


def cmd_translate(args) -> int:
    geom = _geometry(args)
    pc, _ = _split_overrides(args.set)
    traj = plan(_load_program(args.program), geom, pc)
    if args.output:
        write_trajectory(traj, args.output, pc)
    else:
        sys.stdout.write(trajectory_csv(traj))
    return EXIT_OK


def _read_traj(path: str):
    try:
        return read_trajectory(path)
    except (OSError, ValueError) as exc:
        raise UsageError(f"cannot read trajectory {path}: {exc}") from exc


def cmd_verify(args) -> int:
    geom = _geometry(args)
    traj = _read_traj(args.trajectory)
    program = _load_program(args.program) if args.program else None
    report = verify(traj, geom, program)
    print(json.dumps(report.to_dict(), sort_keys=True, indent=2))
    return EXIT_OK


def cmd_emit(args) -> int:
    geom = _geometry(args)
    pc, dc = _split_overrides(args.set)
    traj = resample(_read_traj(args.trajectory), geom, pc)
    stream = emit(traj, dc)
    write_frames(stream, args.output)
    print(json.dumps({"frames": len(stream), "clamped": stream.clamped, "sample_rate": stream.sample_rate}, sort_keys=True))
    return EXIT_OK


def cmd_plot(args) -> int:
    _geometry(args)
    _write_text(render_svg(_read_traj(args.trajectory)), args.output)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--geometry", "-g", help=f"machine geometry JSON (default: ${GEOMETRY_ENV})")
    common.add_argument(
        "--set",
        action="append",
        metavar="KEY=VALUE",
        help="override a planner or drive setting, e.g. max_cartesian_step=1e-5 (repeatable)",
    )
    p = argparse.ArgumentParser(prog="hexakine", description="Hexaglide kinematics and G-code translation.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("dof", help="print the Gruebler mobility count")
    s.set_defaults(func=cmd_dof)

    s = sub.add_parser("ik", parents=[common], help="slider positions for a pose")
    s.add_argument("--pose", required=True, help="px,py,pz,alpha,beta,gamma (m, rad)")
    s.set_defaults(func=cmd_ik)

    s = sub.add_parser("fk", parents=[common], help="platform pose for slider positions")
    s.add_argument("--joints", required=True, help="q1,...,q6 (m)")
    s.add_argument("--guess", help="initial pose px,py,pz,alpha,beta,gamma (default: home)")
    s.set_defaults(func=cmd_fk)

    s = sub.add_parser(
        "translate",
        parents=[common],
        help="G-code program to joint trajectory CSV",
        description="R-form arcs: positive R takes the arc of at most 180 degrees, negative R the longer one. "
        "Full circles need I/J.",
    )
    s.add_argument("program")
    s.add_argument("-o", "--output", help="trajectory CSV (a .json sidecar is written next to it)")
    s.set_defaults(func=cmd_translate)

    s = sub.add_parser("verify", parents=[common], help="replay a trajectory through forward kinematics")
    s.add_argument("trajectory")
    s.add_argument("--program", help="G-code source, to also report path deviation")
    s.set_defaults(func=cmd_verify)

    s = sub.add_parser("emit", parents=[common], help="drive frames from a trajectory")
    s.add_argument("trajectory")
    s.add_argument("-o", "--output", required=True, help="binary frame file (CSV twin written alongside)")
    s.set_defaults(func=cmd_emit)

    s = sub.add_parser("plot", parents=[common], help="SVG of tool path and joint curves")
    s.add_argument("trajectory")
    s.add_argument("-o", "--output", help="SVG file (default: stdout)")
    s.set_defaults(func=cmd_plot)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (UsageError, ConfigError, GeometryError) as exc:
        print(_diagnostic(exc), file=sys.stderr)
        return EXIT_USAGE
    except HexakineError as exc:
        print(_diagnostic(exc), file=sys.stderr)
        return _exit_code(exc)


if __name__ == "__main__":
    sys.exit(main())
