"""Turn motion commands into joint trajectories and check them.

``plan`` produces one sample per interpolation knot (so sample density follows
``max_cartesian_step`` and the chord tolerance), timestamped from the feed.
``resample`` moves that onto the uniform servo grid used by the drive emitter.
``verify`` replays any trajectory through forward kinematics.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ConfigError, NoConvergence, WorkspaceViolation
from .gcode import MotionCommand
from .geometry import MachineGeometry, PlatformPose
from .kinematics import BRANCH, _limb_vectors, closure_residuals, solve_forward_kinematics

DEGENERATE_TOL = 1e-12
CSV_HEADER = (
    "t,px,py,pz,alpha,beta,gamma,"
    + ",".join(f"q{i}" for i in range(1, 7))
    + ","
    + ",".join(f"qd{i}" for i in range(1, 7))
    + ",line"
)


class DegenerateMove(UserWarning):
    """A move whose start and target coincide; it contributes no samples."""


@dataclass(frozen=True)
class PlannerConfig:
    max_cartesian_step: float = 1e-4  # m
    arc_chord_tolerance: float = 1e-5  # m
    rapid_feed: float = 0.02  # m/s
    workspace_margin: float = 1e-6  # m
    sample_rate: float = 1000.0  # Hz
    characteristic_radius: float = 0.1  # m, converts angular-only moves to path length

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                raise ConfigError(f"{f.name} must be a positive number, got {v!r}")
        if self.max_cartesian_step < self.arc_chord_tolerance:
            raise ConfigError("max_cartesian_step must be >= arc_chord_tolerance")

    def with_overrides(self, overrides: dict[str, str]) -> "PlannerConfig":
        names = {f.name for f in fields(self)}
        updates = {}
        for k, v in overrides.items():
            if k not in names:
                raise ConfigError(f"unknown planner setting {k!r}")
            try:
                updates[k] = float(v)
            except ValueError as exc:
                raise ConfigError(f"{k} needs a number, got {v!r}") from exc
        return replace(self, **updates)


@dataclass(frozen=True)
class TrajectorySample:
    t: float
    pose: PlatformPose | None
    joints: np.ndarray
    joint_velocity: np.ndarray
    source_line: int


@dataclass(frozen=True, eq=False)
class JointTrajectory:
    """Column-oriented trajectory; index it to get :class:`TrajectorySample` rows.

    ``poses`` is ``None`` for trajectories reconstructed from drive frames.
    """

    t: np.ndarray
    poses: np.ndarray | None
    joints: np.ndarray
    joint_velocity: np.ndarray
    lines: np.ndarray
    geometry_fingerprint: str = ""

    def __len__(self) -> int:
        return len(self.t)

    def __getitem__(self, k: int) -> TrajectorySample:
        pose = None if self.poses is None else PlatformPose.from_array(self.poses[k])
        return TrajectorySample(float(self.t[k]), pose, self.joints[k], self.joint_velocity[k], int(self.lines[k]))

    @property
    def samples(self) -> list[TrajectorySample]:
        return [self[k] for k in range(len(self))]

    @property
    def duration(self) -> float:
        return float(self.t[-1])


# --- interpolation -----------------------------------------------------------


def _interpolate(command: MotionCommand, start: np.ndarray, cfg: PlannerConfig) -> tuple[np.ndarray, bool]:
    end = command.target.as_array()
    delta = end - start
    delta[3:] = [math.remainder(a, 2 * math.pi) for a in delta[3:]]
    if command.kind == "arc":
        return _interpolate_arc(command, start, delta, cfg)
    if np.max(np.abs(delta)) <= DEGENERATE_TOL:
        return start[None, :].copy(), True
    lin = float(np.linalg.norm(delta[:3]))
    length = lin if lin > DEGENERATE_TOL else float(np.linalg.norm(delta[3:])) * cfg.characteristic_radius
    n = max(1, math.ceil(length / cfg.max_cartesian_step - 1e-9))
    s = np.arange(n + 1) / n
    pts = start + s[:, None] * delta
    pts[-1] = start + delta
    return pts, False


def arc_segment_count(sweep: float, radius: float, cfg: PlannerConfig) -> int:
    """Equal angular steps so that chord sag <= tolerance and chord length <= max step."""
    tol = cfg.arc_chord_tolerance
    max_angle = 2.0 * math.acos(1.0 - tol / radius) if tol < radius else math.pi
    step = cfg.max_cartesian_step
    if step < 2.0 * radius:
        max_angle = min(max_angle, 2.0 * math.asin(step / (2.0 * radius)))
    max_angle = min(max_angle, math.pi / 2.0)
    return max(1, math.ceil(sweep / max_angle - 1e-9))


def arc_sweep(command: MotionCommand, start: np.ndarray) -> tuple[float, float, float]:
    """Return ``(start_angle, signed_sweep, start_radius)`` of an arc command from ``start``."""
    cx, cy = command.arc_center[0], command.arc_center[1]
    end = command.target.as_array()
    th0 = math.atan2(start[1] - cy, start[0] - cx)
    th1 = math.atan2(end[1] - cy, end[0] - cx)
    r0 = math.hypot(start[0] - cx, start[1] - cy)
    if command.arc_sense == "CW":
        sweep = (th0 - th1) % (2 * math.pi)
    else:
        sweep = (th1 - th0) % (2 * math.pi)
    # coincident endpoints mean a full circle (only reachable through I/J words)
    if math.hypot(end[0] - start[0], end[1] - start[1]) <= DEGENERATE_TOL:
        sweep = 2 * math.pi
    sign = -1.0 if command.arc_sense == "CW" else 1.0
    return th0, sign * sweep, r0


def _interpolate_arc(command, start, delta, cfg):
    th0, sweep, r0 = arc_sweep(command, start)
    if r0 <= DEGENERATE_TOL:
        return start[None, :].copy(), True
    cx, cy = command.arc_center[0], command.arc_center[1]
    end = start + delta
    r1 = math.hypot(end[0] - cx, end[1] - cy)
    n = arc_segment_count(abs(sweep), max(r0, r1), cfg)
    s = np.arange(n + 1) / n
    phi = th0 + sweep * s
    r = r0 + (r1 - r0) * s
    pts = start + s[:, None] * delta
    pts[:, 0] = cx + r * np.cos(phi)
    pts[:, 1] = cy + r * np.sin(phi)
    pts[0] = start
    pts[-1] = end
    return pts, False


def interpolate(command: MotionCommand, start: PlatformPose, cfg: PlannerConfig | None = None) -> list[PlatformPose]:
    """Poses along one move, endpoints included.

    A move whose target equals ``start`` (or an arc of zero radius) yields just
    the start pose and a :class:`DegenerateMove` warning.
    """
    cfg = cfg or PlannerConfig()
    pts, degenerate = _interpolate(command, start.as_array(), cfg)
    if degenerate:
        warnings.warn(DegenerateMove(f"line {command.source_line}: zero-length move"), stacklevel=2)
    return [PlatformPose.from_array(p) for p in pts]


# --- planning ----------------------------------------------------------------


def to_machine_frame(commands: Sequence[MotionCommand], home: PlatformPose) -> list[MotionCommand]:
    """Offset program-frame commands by the home pose (positions and angles add)."""
    h = home.as_array()
    out = []
    for c in commands:
        target = PlatformPose.from_array(c.target.as_array() + h)
        center = None
        if c.arc_center is not None:
            center = tuple(float(v) for v in np.asarray(c.arc_center) + h[:3])
        out.append(replace(c, target=target, arc_center=center))
    return out


def _segment_durations(pts: np.ndarray, feed: float, cfg: PlannerConfig) -> np.ndarray:
    d = np.diff(pts, axis=0)
    dist = np.linalg.norm(d[:, :3], axis=1)
    angular = np.linalg.norm(d[:, 3:], axis=1) * cfg.characteristic_radius
    dist = np.where(dist > DEGENERATE_TOL, dist, angular)
    return dist / feed


def _joint_positions(geom, poses):
    b = _limb_vectors(geom, poses)
    disc = geom.arm_length[None, :] ** 2 - b[..., 1] ** 2 - b[..., 2] ** 2
    with np.errstate(invalid="ignore"):
        q = b[..., 0] + BRANCH * np.sqrt(disc)
    return q, disc


def _check_workspace(geom, poses, q, disc, lines, margin):
    bad_disc = (disc < 0) | (np.sqrt(np.maximum(disc, 0.0)) < margin)
    lo = geom.rail_travel[:, 0] + margin
    hi = geom.rail_travel[:, 1] - margin
    bad_rail = ~bad_disc & ((q < lo) | (q > hi))
    bad = bad_disc | bad_rail
    if bad.any():
        k, limb = np.argwhere(bad)[0]
        reason = "discriminant" if bad_disc[k, limb] else "rail_limit"
        raise WorkspaceViolation(int(lines[k]), poses[k].tolist(), int(limb) + 1, reason)


def plan(commands: Sequence[MotionCommand], geom: MachineGeometry, cfg: PlannerConfig | None = None) -> JointTrajectory:
    """Interpolate, time and map every command through inverse kinematics.

    The trajectory starts at the home pose at ``t = 0``. Any sample outside
    the workspace (with ``cfg.workspace_margin``) or the rail travel rejects
    the whole program with :class:`WorkspaceViolation` naming the first
    offending G-code line.
    """
    cfg = cfg or PlannerConfig()
    home = geom.home_pose.as_array()
    pose_chunks = [home[None, :]]
    time_chunks = [np.zeros(1)]
    line_chunks = [np.zeros(1, dtype=np.int64)]
    runs = []  # (first index, last index) of each command's knots, sharing the start knot
    t_now = 0.0
    cur = home
    n_total = 1
    for cmd in to_machine_frame(commands, geom.home_pose):
        pts, degenerate = _interpolate(cmd, cur, cfg)
        if degenerate:
            continue
        feed = cmd.feed if cmd.feed is not None else cfg.rapid_feed
        times = t_now + np.cumsum(_segment_durations(pts, feed, cfg))
        pose_chunks.append(pts[1:])
        time_chunks.append(times)
        line_chunks.append(np.full(len(pts) - 1, cmd.source_line, dtype=np.int64))
        runs.append((n_total - 1, n_total + len(pts) - 2))
        n_total += len(pts) - 1
        t_now = float(times[-1])
        cur = pts[-1]
    poses = np.concatenate(pose_chunks)
    t = np.concatenate(time_chunks)
    lines = np.concatenate(line_chunks)
    q, disc = _joint_positions(geom, poses)
    _check_workspace(geom, poses, q, disc, lines, cfg.workspace_margin)
    qd = np.zeros_like(q)
    for a, b in runs:
        g = np.gradient(q[a : b + 1], t[a : b + 1], axis=0, edge_order=1)
        qd[a + 1 : b + 1] = g[1:]
        if a == 0:
            qd[0] = g[0]
    return JointTrajectory(t, poses, q, qd, lines, geom.fingerprint())


def resample(traj: JointTrajectory, geom: MachineGeometry, cfg: PlannerConfig | None = None) -> JointTrajectory:
    """Uniform ``cfg.sample_rate`` grid: poses linearly between knots, joints by exact IK.

    The grid runs to the first tick at or after the end time; ticks past the
    end hold the final pose.
    """
    cfg = cfg or PlannerConfig()
    if traj.poses is None:
        raise ValueError("cannot resample a trajectory without poses")
    dt = 1.0 / cfg.sample_rate
    n = math.ceil(traj.duration * cfg.sample_rate - 1e-9)
    grid = np.arange(n + 1) * dt
    knots = traj.poses.copy()
    knots[:, 3:] = np.unwrap(knots[:, 3:], axis=0)
    if len(traj) == 1:
        poses = np.repeat(knots, n + 1, axis=0)
        lines = np.repeat(traj.lines, n + 1)
    else:
        tc = np.minimum(grid, traj.t[-1])
        idx = np.clip(np.searchsorted(traj.t, tc, side="right") - 1, 0, len(traj) - 2)
        span = traj.t[idx + 1] - traj.t[idx]
        frac = np.clip((tc - traj.t[idx]) / span, 0.0, 1.0)
        poses = knots[idx] + frac[:, None] * (knots[idx + 1] - knots[idx])
        on_knot = frac == 0.0
        poses[on_knot] = knots[idx[on_knot]]
        lines = np.where(on_knot, traj.lines[idx], traj.lines[idx + 1])
    poses[:, 3:] = np.remainder(poses[:, 3:] + np.pi, 2 * np.pi) - np.pi
    q, disc = _joint_positions(geom, poses)
    _check_workspace(geom, poses, q, disc, lines, cfg.workspace_margin)
    if len(grid) > 1:
        qd = np.gradient(q, dt, axis=0, edge_order=1)
    else:
        qd = np.zeros_like(q)
    return JointTrajectory(grid, poses, q, qd, lines.astype(np.int64), traj.geometry_fingerprint)


# --- verification ------------------------------------------------------------


@dataclass(frozen=True)
class VerifyReport:
    samples: int
    max_pose_error: float
    max_closure_residual: float
    max_joint_speed: float
    max_fk_iterations: int
    median_fk_iterations: float
    max_path_deviation: float | None = None
    max_arc_radial_error: float | None = None

    def to_dict(self) -> dict:
        return asdict(self)


def _angle_diff(a, b):
    return np.remainder(a - b + np.pi, 2 * np.pi) - np.pi


def verify(
    traj: JointTrajectory,
    geom: MachineGeometry,
    program: Sequence[MotionCommand] | None = None,
) -> VerifyReport:
    """Replay every sample through forward kinematics, warm-starting from the previous one.

    With ``program`` (program-frame commands, as given to :func:`plan`), also
    measures each sample's distance from its ideal line or arc.

    Raises
    ------
    NoConvergence
        With ``sample_index`` set to the first sample that cannot be reconstructed.
    """
    guess = geom.home_pose.as_array()
    pose_err = 0.0
    closure = 0.0
    iters = []
    for k in range(len(traj)):
        try:
            res = solve_forward_kinematics(geom, traj.joints[k], guess)
        except NoConvergence as exc:
            raise NoConvergence(exc.iterations, exc.residual, sample_index=k) from exc
        chi = res.pose.as_array()
        iters.append(res.iterations)
        if traj.poses is not None:
            ref = traj.poses[k]
            err = np.concatenate([chi[:3] - ref[:3], _angle_diff(chi[3:], ref[3:])])
            pose_err = max(pose_err, float(np.max(np.abs(err))))
            closure = max(closure, float(np.max(np.abs(closure_residuals(geom, ref, traj.joints[k])))))
        else:
            closure = max(closure, float(np.max(np.abs(closure_residuals(geom, chi, traj.joints[k])))))
        guess = chi
    path_dev = arc_err = None
    if program is not None and traj.poses is not None:
        path_dev, arc_err = path_errors(traj, geom, program)
    speed = float(np.max(np.abs(traj.joint_velocity))) if len(traj) else 0.0
    return VerifyReport(
        samples=len(traj),
        max_pose_error=pose_err,
        max_closure_residual=closure,
        max_joint_speed=speed,
        max_fk_iterations=int(max(iters)) if iters else 0,
        median_fk_iterations=float(np.median(iters)) if iters else 0.0,
        max_path_deviation=path_dev,
        max_arc_radial_error=arc_err,
    )


def path_errors(traj: JointTrajectory, geom: MachineGeometry, program: Sequence[MotionCommand]) -> tuple[float, float]:
    """Max distance of samples from their straight segments, and max radial error on arcs."""
    by_line = {}
    cur = geom.home_pose.as_array()
    for cmd in to_machine_frame(program, geom.home_pose):
        by_line[cmd.source_line] = (cmd, cur)
        cur = cmd.target.as_array()
    lin_dev = 0.0
    arc_dev = 0.0
    for k in range(len(traj)):
        entry = by_line.get(int(traj.lines[k]))
        if entry is None:
            continue
        cmd, start = entry
        p = traj.poses[k, :3]
        if cmd.kind == "arc":
            arc_dev = max(arc_dev, _radial_error(cmd, start, p))
        else:
            lin_dev = max(lin_dev, _segment_distance(p, start[:3], cmd.target.as_array()[:3]))
    return lin_dev, arc_dev


def _segment_distance(p, a, b) -> float:
    ab = b - a
    denom = float(ab @ ab)
    if denom == 0.0:
        return float(np.linalg.norm(p - a))
    s = min(1.0, max(0.0, float((p - a) @ ab) / denom))
    return float(np.linalg.norm(p - (a + s * ab)))


def _radial_error(cmd, start, p) -> float:
    th0, sweep, r0 = arc_sweep(cmd, start)
    cx, cy = cmd.arc_center[0], cmd.arc_center[1]
    end = cmd.target.as_array()
    r1 = math.hypot(end[0] - cx, end[1] - cy)
    th = math.atan2(p[1] - cy, p[0] - cx)
    along = (th - th0) * math.copysign(1.0, sweep) % (2 * math.pi)
    frac = min(1.0, along / abs(sweep)) if sweep else 0.0
    return abs(math.hypot(p[0] - cx, p[1] - cy) - (r0 + (r1 - r0) * frac))


# --- file formats ------------------------------------------------------------


def _g9(v: float) -> str:
    s = f"{v:.9g}"
    return "0" if s == "-0" else s


def trajectory_csv(traj: JointTrajectory) -> str:
    poses = traj.poses if traj.poses is not None else np.full((len(traj), 6), np.nan)
    rows = [CSV_HEADER]
    for k in range(len(traj)):
        vals = [traj.t[k], *poses[k], *traj.joints[k], *traj.joint_velocity[k]]
        rows.append(",".join(_g9(float(v)) for v in vals) + f",{int(traj.lines[k])}")
    return "\n".join(rows) + "\n"


def sidecar_path(path: str | Path) -> Path:
    return Path(path).with_suffix(".json")


def write_trajectory(traj: JointTrajectory, path: str | Path, cfg: PlannerConfig | None = None) -> None:
    """Write the CSV and its JSON sidecar (config and geometry fingerprint)."""
    path = Path(path)
    path.write_text(trajectory_csv(traj), encoding="utf-8")
    meta = {
        "format": "hexakine-trajectory/1",
        "geometry_fingerprint": traj.geometry_fingerprint,
        "planner": asdict(cfg or PlannerConfig()),
        "samples": len(traj),
    }
    sidecar_path(path).write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def read_trajectory(path: str | Path) -> JointTrajectory:
    path = Path(path)
    with path.open(encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != CSV_HEADER:
            raise ValueError(f"{path}: not a trajectory CSV (unexpected header)")
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    if data.shape[1] != 20 or len(data) == 0:
        raise ValueError(f"{path}: expected 20 columns and at least one row")
    poses = data[:, 1:7]
    fingerprint = ""
    side = sidecar_path(path)
    if side.exists():
        fingerprint = json.loads(side.read_text(encoding="utf-8")).get("geometry_fingerprint", "")
    return JointTrajectory(
        t=data[:, 0],
        poses=None if np.isnan(poses).all() else poses,
        joints=data[:, 7:13],
        joint_velocity=data[:, 13:19],
        lines=data[:, 19].astype(np.int64),
        geometry_fingerprint=fingerprint,
    )
