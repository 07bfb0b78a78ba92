"""Machine geometry, platform poses and the geometry file format."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .errors import GeometryError

CONSTRAINT_TOL = 1e-12
GEOMETRIC_PARAMETER_COUNT = 42


def normalize_angle(a: float) -> float:
    """Wrap an angle into (-pi, pi]."""
    a = math.remainder(a, 2.0 * math.pi)
    return math.pi if a == -math.pi else a


@dataclass(frozen=True)
class PlatformPose:
    """Position (m) of the platform frame origin and its X/Y/Z angles (rad)."""

    position: tuple[float, float, float] = (0.0, 0.0, 0.0)
    orientation: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        pos = tuple(float(v) for v in self.position)
        ang = tuple(normalize_angle(float(v)) for v in self.orientation)
        if len(pos) != 3 or len(ang) != 3:
            raise ValueError("pose needs 3 position and 3 angle components")
        if not all(math.isfinite(v) for v in pos + ang):
            raise ValueError("pose components must be finite")
        object.__setattr__(self, "position", pos)
        object.__setattr__(self, "orientation", ang)

    @classmethod
    def from_array(cls, chi: Sequence[float]) -> "PlatformPose":
        chi = [float(v) for v in chi]
        if len(chi) != 6:
            raise ValueError("pose vector must have six components")
        return cls(tuple(chi[:3]), tuple(chi[3:]))

    def as_array(self) -> np.ndarray:
        return np.array(self.position + self.orientation)


@dataclass(frozen=True, eq=False)
class MachineGeometry:
    """The 42 geometric parameters of a Hexaglide plus rail limits and home pose.

    Arrays are indexed by limb (0-based here; limb ``i`` in the docs is row
    ``i - 1``). Construction only checks shapes and arm lengths; the
    coordinate-frame constraints are checked by :meth:`check_constraints`,
    which :func:`load_geometry` always calls.
    """

    rail_anchor: np.ndarray
    platform_joint: np.ndarray
    arm_length: np.ndarray
    rail_travel: np.ndarray = field(default=None)
    home_pose: PlatformPose = field(default_factory=PlatformPose)

    def __post_init__(self):
        S = np.array(self.rail_anchor, dtype=float)
        B = np.array(self.platform_joint, dtype=float)
        l = np.array(self.arm_length, dtype=float)
        if self.rail_travel is None:
            travel = np.tile([-np.inf, np.inf], (6, 1))
        else:
            travel = np.array(self.rail_travel, dtype=float)
        if S.shape != (6, 3) or B.shape != (6, 3):
            raise GeometryError("rail anchors and platform joints must be 6x3")
        if l.shape != (6,) or travel.shape != (6, 2):
            raise GeometryError("need six arm lengths and six travel intervals")
        if not (np.all(np.isfinite(S)) and np.all(np.isfinite(B)) and np.all(np.isfinite(l))):
            raise GeometryError("geometry values must be finite")
        if np.any(l <= 0):
            raise GeometryError("arm lengths must be positive", "arm_length > 0")
        if np.any(travel[:, 0] >= travel[:, 1]):
            raise GeometryError("rail travel intervals must satisfy min < max", "travel")
        for name, arr in (("rail_anchor", S), ("platform_joint", B), ("arm_length", l), ("rail_travel", travel)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if not isinstance(self.home_pose, PlatformPose):
            object.__setattr__(self, "home_pose", PlatformPose.from_array(self.home_pose))

    def __eq__(self, other):
        if not isinstance(other, MachineGeometry):
            return NotImplemented
        return self.to_dict() == other.to_dict()

    __hash__ = None

    def constraint_violations(self, tol: float = CONSTRAINT_TOL) -> list[str]:
        return [name for name, residual in CONSTRAINTS if abs(residual(self)) > tol]

    def check_constraints(self, tol: float = CONSTRAINT_TOL) -> None:
        bad = self.constraint_violations(tol)
        if bad:
            raise GeometryError(f"geometry violates frame constraint {bad[0]}", bad[0])

    def parameter_vector(self) -> np.ndarray:
        """``[B_1 .. B_6, S_1 .. S_6, l]`` as one 42-vector."""
        return np.concatenate([self.platform_joint.ravel(), self.rail_anchor.ravel(), self.arm_length])

    def to_dict(self) -> dict:
        return {
            "rails": [
                {"S": [float(v) for v in s], "travel": [float(v) for v in t]}
                for s, t in zip(self.rail_anchor, self.rail_travel)
            ],
            "platform": [{"B": [float(v) for v in b]} for b in self.platform_joint],
            "arms": [float(v) for v in self.arm_length],
            "home_pose": [float(v) for v in self.home_pose.as_array()],
        }

    def fingerprint(self) -> str:
        canon = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()



# Frame choice: origin on S_2, the X-Y plane through S_3, and the platform
# x-y plane / x axis fixed by joints B_2, B_3, B_5. Seven scalar equations.
CONSTRAINTS: tuple[tuple[str, Callable[[MachineGeometry], float]], ...] = (
    ("S2x = 0", lambda g: g.rail_anchor[1, 0]),
    ("S2y = 0", lambda g: g.rail_anchor[1, 1]),
    ("S2z = 0", lambda g: g.rail_anchor[1, 2]),
    ("S3z = 0", lambda g: g.rail_anchor[2, 2]),
    ("B2x = B3z", lambda g: g.platform_joint[1, 0] - g.platform_joint[2, 2]),
    ("B3z = B5z", lambda g: g.platform_joint[2, 2] - g.platform_joint[4, 2]),
    ("B2y = B5y", lambda g: g.platform_joint[1, 1] - g.platform_joint[4, 1]),
)

FREE_PARAMETER_COUNT = GEOMETRIC_PARAMETER_COUNT - len(CONSTRAINTS)


def geometry_from_dict(doc: dict, *, check: bool = True) -> MachineGeometry:
    try:
        rails = doc["rails"]
        platform = doc["platform"]
        arms = doc["arms"]
        home = doc["home_pose"]
        if len(rails) != 6 or len(platform) != 6 or len(arms) != 6 or len(home) != 6:
            raise GeometryError("rails, platform and arms need 6 entries; home_pose needs 6 numbers")
        geom = MachineGeometry(
            rail_anchor=[r["S"] for r in rails],
            platform_joint=[p["B"] for p in platform],
            arm_length=arms,
            rail_travel=[r["travel"] for r in rails],
            home_pose=PlatformPose.from_array(home),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise GeometryError(f"malformed geometry document: {exc}") from exc
    if check:
        geom.check_constraints()
    return geom


def load_geometry(path: str | Path) -> MachineGeometry:
    """Read a geometry JSON file, rejecting any that breaks a frame constraint."""
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise GeometryError(f"cannot read geometry file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise GeometryError(f"geometry file {path} is not valid JSON: {exc}") from exc
    return geometry_from_dict(doc)


def save_geometry(geom: MachineGeometry, path: str | Path) -> None:
    Path(path).write_text(json.dumps(geom.to_dict(), indent=2) + "\n", encoding="utf-8")


def reference_geometry_path() -> Path:
    return Path(str(resources.files("hexakine") / "data" / "reference_geometry.json"))


def reference_geometry() -> MachineGeometry:
    """Desk-scale demonstration machine shipped with the package (not measured data)."""
    return load_geometry(reference_geometry_path())
