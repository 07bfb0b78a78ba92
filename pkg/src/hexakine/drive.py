"""Velocity-command drive model: DAC quantization, op-amp scaling, frame files.

Each joint velocity becomes a bipolar driver voltage
``clamp(qd / velocity_fullscale, -1, 1) * driver_fullscale``. The DAC codes
that voltage on ``dac_bits`` bits with mid-scale as 0 V, and the op-amp
multiplies the DAC output (0..dac_fullscale) up to the driver range.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Iterator

import numpy as np

from .errors import ConfigError, RailOverrun
from .geometry import MachineGeometry
from .planner import JointTrajectory

MAGIC = b"HXG1"
HEADER = struct.Struct("<4sHHd")  # magic, dac_bits, joint count, sample rate
FRAME = struct.Struct("<d6H")
assert HEADER.size == 16 and FRAME.size == 20

UNIFORM_RTOL = 1e-6


@dataclass(frozen=True)
class DriveConfig:
    dac_bits: int = 12
    dac_fullscale: float = 3.3  # V
    opamp_gain: float = 10.0 / 3.3
    driver_fullscale: float = 10.0  # V
    velocity_fullscale: float = 0.5  # m/s at +driver_fullscale

    def __post_init__(self):
        if not (isinstance(self.dac_bits, int) and 8 <= self.dac_bits <= 16):
            raise ConfigError(f"dac_bits must be an integer in [8, 16], got {self.dac_bits!r}")
        for name in ("dac_fullscale", "opamp_gain", "driver_fullscale", "velocity_fullscale"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ConfigError(f"{name} must be positive, got {v!r}")
        chain = self.dac_fullscale * self.opamp_gain
        if abs(chain - self.driver_fullscale) > 1e-9:
            raise ConfigError(
                f"dac_fullscale * opamp_gain = {chain:.9g} V does not match driver_fullscale {self.driver_fullscale:.9g} V"
            )

    @property
    def max_code(self) -> int:
        return (1 << self.dac_bits) - 1

    @property
    def lsb_voltage(self) -> float:
        return 2.0 * self.driver_fullscale / self.max_code

    @property
    def velocity_lsb(self) -> float:
        return 2.0 * self.velocity_fullscale / self.max_code

    def with_overrides(self, overrides: dict[str, str]) -> "DriveConfig":
        names = {f.name for f in fields(self)}
        updates = {}
        for k, v in overrides.items():
            if k not in names:
                raise ConfigError(f"unknown drive setting {k!r}")
            try:
                updates[k] = int(v) if k == "dac_bits" else float(v)
            except ValueError as exc:
                raise ConfigError(f"{k} needs a number, got {v!r}") from exc
        # keep the op-amp chain consistent when only the driver range changes
        if "driver_fullscale" in updates and "opamp_gain" not in updates:
            dac = updates.get("dac_fullscale", self.dac_fullscale)
            updates["opamp_gain"] = updates["driver_fullscale"] / dac
        return replace(self, **updates)


def round_half_away(x):
    x = np.asarray(x, dtype=float)
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


def velocity_to_voltage(qd, cfg: DriveConfig) -> np.ndarray:
    return np.clip(np.asarray(qd, dtype=float) / cfg.velocity_fullscale, -1.0, 1.0) * cfg.driver_fullscale


def quantize(voltage, cfg: DriveConfig) -> np.ndarray:
    """Nearest DAC code for a driver voltage in ``[-fullscale, +fullscale]``."""
    u = np.clip(np.asarray(voltage, dtype=float) / cfg.driver_fullscale, -1.0, 1.0)
    return round_half_away((u + 1.0) / 2.0 * cfg.max_code).astype(np.int64)


def dequantize(code, cfg: DriveConfig) -> np.ndarray:
    return (np.asarray(code, dtype=float) / cfg.max_code * 2.0 - 1.0) * cfg.driver_fullscale


def dac_output_voltage(code, cfg: DriveConfig) -> np.ndarray:
    """Unipolar voltage at the DAC pin, before the op-amp stage."""
    return np.asarray(code, dtype=float) / cfg.max_code * cfg.dac_fullscale


@dataclass(frozen=True)
class DriveFrame:
    t: float
    dac_code: tuple[int, ...]
    driver_voltage: tuple[float, ...]


@dataclass(frozen=True, eq=False)
class DriveStream:
    """Time-ordered frames plus the number of clamped velocity commands."""

    t: np.ndarray
    codes: np.ndarray  # (n, 6) integers
    voltages: np.ndarray  # (n, 6) volts
    sample_rate: float
    dac_bits: int
    clamped: int = 0

    def __len__(self) -> int:
        return len(self.t)

    def __iter__(self) -> Iterator[DriveFrame]:
        for k in range(len(self.t)):
            yield DriveFrame(
                float(self.t[k]),
                tuple(int(c) for c in self.codes[k]),
                tuple(float(v) for v in self.voltages[k]),
            )


def _uniform_rate(t: np.ndarray) -> float:
    if len(t) < 2:
        return 0.0
    dt = np.diff(t)
    step = (t[-1] - t[0]) / (len(t) - 1)
    if step <= 0 or np.max(np.abs(dt - step)) > UNIFORM_RTOL * step:
        raise ValueError("trajectory is not uniformly sampled; resample it first")
    return 1.0 / step


def emit(traj: JointTrajectory, cfg: DriveConfig | None = None) -> DriveStream:
    """Quantize every joint velocity sample into a drive frame."""
    cfg = cfg or DriveConfig()
    rate = _uniform_rate(traj.t)
    qd = np.asarray(traj.joint_velocity, dtype=float)
    clamped = int(np.count_nonzero(np.abs(qd) > cfg.velocity_fullscale))
    codes = quantize(velocity_to_voltage(qd, cfg), cfg)
    return DriveStream(
        t=np.asarray(traj.t, dtype=float).copy(),
        codes=codes,
        voltages=dequantize(codes, cfg),
        sample_rate=rate,
        dac_bits=cfg.dac_bits,
        clamped=clamped,
    )


def replay(stream: DriveStream, geom: MachineGeometry, cfg: DriveConfig | None, initial) -> JointTrajectory:
    """Integrate the commanded velocities (explicit Euler) back into slider positions.

    Velocity comes from each frame's driver voltage, so hand-built frames at
    0 V hold position exactly.
    """
    cfg = cfg or DriveConfig()
    n = len(stream)
    q = np.empty((n, 6))
    q[0] = np.asarray(initial, dtype=float)
    v = np.asarray(stream.voltages, dtype=float) / cfg.driver_fullscale * cfg.velocity_fullscale
    dt = np.diff(stream.t)
    lo, hi = geom.rail_travel[:, 0], geom.rail_travel[:, 1]
    for k in range(n):
        if k > 0:
            q[k] = q[k - 1] + v[k - 1] * dt[k - 1]
        out = (q[k] < lo) | (q[k] > hi)
        if out.any():
            limb = int(np.argmax(out))
            raise RailOverrun(k, limb + 1, float(q[k, limb]))
    return JointTrajectory(
        t=np.asarray(stream.t, dtype=float).copy(),
        poses=None,
        joints=q,
        joint_velocity=v,
        lines=np.zeros(n, dtype=np.int64),
        geometry_fingerprint=geom.fingerprint(),
    )


def replay_error_bound(traj: JointTrajectory, cfg: DriveConfig) -> float:
    """Allowed emit->replay position error: one velocity LSB over the duration
    plus the largest single-step displacement (Euler vs central differences)."""
    step = float(np.max(np.abs(np.diff(traj.joints, axis=0)))) if len(traj) > 1 else 0.0
    return cfg.velocity_lsb * traj.duration + step


# --- frame files -------------------------------------------------------------


def frames_bytes(stream: DriveStream) -> bytes:
    parts = [HEADER.pack(MAGIC, stream.dac_bits, 6, float(stream.sample_rate))]
    for k in range(len(stream)):
        parts.append(FRAME.pack(float(stream.t[k]), *(int(c) for c in stream.codes[k])))
    return b"".join(parts)


def frames_csv(stream: DriveStream) -> str:
    rows = ["t," + ",".join(f"code{i}" for i in range(1, 7)) + "," + ",".join(f"volt{i}" for i in range(1, 7))]
    for k in range(len(stream)):
        codes = ",".join(str(int(c)) for c in stream.codes[k])
        volts = ",".join(f"{v:.6f}" for v in stream.voltages[k])
        rows.append(f"{stream.t[k]:.9g},{codes},{volts}")
    return "\n".join(rows) + "\n"


def frames_twin_path(path: str | Path) -> Path:
    """CSV twin next to a frame file: ``frames.bin`` -> ``frames.bin.csv``."""
    path = Path(path)
    return path.with_name(path.name + ".csv")


def write_frames(stream: DriveStream, path: str | Path) -> Path:
    """Write the binary stream and its CSV twin; returns the CSV path."""
    path = Path(path)
    path.write_bytes(frames_bytes(stream))
    twin = frames_twin_path(path)
    twin.write_text(frames_csv(stream), encoding="utf-8")
    return twin


def read_frames(path: str | Path, cfg: DriveConfig | None = None) -> DriveStream:
    data = Path(path).read_bytes()
    if len(data) < HEADER.size:
        raise ValueError(f"{path}: too short for a frame file")
    magic, bits, joints, rate = HEADER.unpack_from(data)
    if magic != MAGIC or joints != 6:
        raise ValueError(f"{path}: not an HXG1 frame file")
    body = data[HEADER.size :]
    if len(body) % FRAME.size:
        raise ValueError(f"{path}: truncated frame record")
    cfg = cfg or DriveConfig()
    if cfg.dac_bits != bits:
        cfg = replace(cfg, dac_bits=bits)
    recs = list(FRAME.iter_unpack(body))
    t = np.array([r[0] for r in recs], dtype=float)
    codes = np.array([r[1:] for r in recs], dtype=np.int64).reshape(-1, 6)
    return DriveStream(t, codes, dequantize(codes, cfg), rate, bits)
