"""Exception hierarchy shared by every stage of the pipeline.

Each error carries enough context (limb, source line, sample index) for the
CLI to turn it into a one-line diagnostic without string parsing.
"""

from __future__ import annotations


class HexakineError(Exception):
    """Base class for all library errors."""

    kind = "error"

    def details(self) -> dict:
        return {}


# --- kinematics -------------------------------------------------------------


class GeometryError(HexakineError):
    """Invalid machine geometry or geometry file."""

    kind = "GeometryError"

    def __init__(self, message: str, constraint: str | None = None):
        super().__init__(message)
        self.constraint = constraint

    def details(self) -> dict:
        return {"constraint": self.constraint} if self.constraint else {}


class Unreachable(HexakineError):
    """Pose outside the workspace: some limb has a negative discriminant."""

    kind = "Unreachable"

    def __init__(self, limb: int, discriminant: float):
        super().__init__(f"limb {limb} unreachable (discriminant {discriminant:.3e} m^2)")
        self.limb = limb
        self.discriminant = discriminant

    def details(self) -> dict:
        return {"limb": self.limb, "discriminant": self.discriminant}


class SingularPose(HexakineError):
    kind = "SingularPose"

    def __init__(self, condition: float):
        super().__init__(f"jacobian condition number {condition:.3e} exceeds limit")
        self.condition = condition

    def details(self) -> dict:
        return {"condition": self.condition}


class NoConvergence(HexakineError):
    kind = "NoConvergence"

    def __init__(self, iterations: int, residual: float, sample_index: int | None = None):
        msg = f"forward kinematics did not converge after {iterations} iterations (residual {residual:.3e} m)"
        if sample_index is not None:
            msg += f" at sample {sample_index}"
        super().__init__(msg)
        self.iterations = iterations
        self.residual = residual
        self.sample_index = sample_index

    def details(self) -> dict:
        out = {"iterations": self.iterations, "residual": self.residual}
        if self.sample_index is not None:
            out["sample_index"] = self.sample_index
        return out


# --- G-code frontend --------------------------------------------------------


class GCodeError(HexakineError):
    """Any error tied to a line of a G-code program."""

    kind = "GCodeError"

    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line
        self.message = message

    def details(self) -> dict:
        return {"line": self.line}


class LexError(GCodeError):
    kind = "LexError"

    def __init__(self, line: int, column: int, fragment: str, reason: str = "unrecognized input"):
        super().__init__(line, f"{reason} at column {column}: {fragment!r}")
        self.column = column
        self.fragment = fragment

    def details(self) -> dict:
        return {"line": self.line, "column": self.column, "fragment": self.fragment}


class UnsupportedCode(GCodeError):
    kind = "UnsupportedCode"

    def __init__(self, line: int, word: str):
        super().__init__(line, f"{word} unsupported")
        self.word = word

    def details(self) -> dict:
        return {"line": self.line, "word": self.word}


class MissingFeed(GCodeError):
    kind = "MissingFeed"

    def __init__(self, line: int):
        super().__init__(line, "feed motion before any F word")


class BadArc(GCodeError):
    kind = "BadArc"

    def __init__(self, line: int, mismatch: float, reason: str | None = None):
        super().__init__(line, reason or f"arc radius mismatch {mismatch:.6f} mm")
        self.mismatch = mismatch

    def details(self) -> dict:
        return {"line": self.line, "mismatch_mm": self.mismatch}


class ModalError(GCodeError):
    """Coordinates given while no motion mode is active."""

    kind = "ModalError"


# --- planning / drive -------------------------------------------------------


class WorkspaceViolation(HexakineError):
    kind = "WorkspaceViolation"

    def __init__(self, line: int, pose, limb: int, reason: str):
        coords = ",".join(f"{v:.6g}" for v in pose)
        super().__init__(f"line {line}: limb {limb} {reason} violation at pose [{coords}]")
        self.line = line
        self.pose = tuple(pose)
        self.limb = limb
        self.reason = reason

    def details(self) -> dict:
        return {"line": self.line, "limb": self.limb, "reason": self.reason, "pose": list(self.pose)}


class RailOverrun(HexakineError):
    kind = "RailOverrun"

    def __init__(self, frame: int, limb: int, position: float):
        super().__init__(f"frame {frame}: limb {limb} slider at {position:.6g} m leaves rail travel")
        self.frame = frame
        self.limb = limb
        self.position = position

    def details(self) -> dict:
        return {"frame": self.frame, "limb": self.limb, "position": self.position}


class ConfigError(HexakineError):
    kind = "ConfigError"
