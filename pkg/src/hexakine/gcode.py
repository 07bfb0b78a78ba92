"""G-code tokenizer, modal interpreter and canonical serializer.

The accepted dialect is a small RS-274 subset: G0/G1/G2/G3 motion, G17,
G20/G21 units, G90/G91 distance mode, and M0/M2/M3/M5/M30 plus S/T words as
pass-through annotations. Any other G or M code is an error rather than being
skipped.

Program coordinates are work coordinates: X/Y/Z are millimetres (or inches
under G20) and A/B/C are degrees. The interpreter emits targets in metres and
radians; the planner adds the machine home pose as the work offset.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

from .errors import BadArc, LexError, MissingFeed, ModalError, UnsupportedCode
from .geometry import PlatformPose

LETTERS = frozenset("GMXYZABCIJKRFSNT")
AXES = "XYZABC"
MOTION_G = {0: "rapid", 1: "linear", 2: "arc_cw", 3: "arc_ccw"}
MODAL_G = {17, 20, 21, 90, 91}
SUPPORTED_M = {0, 2, 3, 5, 30}
PROGRAM_END_M = {2, 30}

MM_PER_INCH = 25.4
ARC_RADIUS_TOL_MM = 1e-4

_NUMBER = re.compile(r"[+-]?(?:\d+(?:\.\d*)?|\.\d+)")


@dataclass(frozen=True)
class Word:
    letter: str
    value: float
    column: int = field(default=0, compare=False)

    def __str__(self) -> str:
        return f"{self.letter}{_fmt_code(self.value)}"


@dataclass(frozen=True)
class Block:
    words: tuple[Word, ...]
    source_line: int
    line_number: int | None = None

    def get(self, letter: str) -> Word | None:
        for w in self.words:
            if w.letter == letter:
                return w
        return None


@dataclass(frozen=True)
class ModalState:
    motion_mode: str | None = None
    feed_rate: float | None = None  # mm/min
    units: str = "mm"
    distance_mode: str = "absolute"
    plane: str = "XY"
    current_point: tuple[float, float, float] = (0.0, 0.0, 0.0)  # mm
    current_orientation: tuple[float, float, float] = (0.0, 0.0, 0.0)  # degrees


@dataclass(frozen=True)
class MotionCommand:
    """A fully resolved move. Units are SI (m, rad, m/s); ``feed`` is None for rapids."""

    kind: str  # "rapid" | "linear" | "arc"
    target: PlatformPose
    source_line: int
    feed: float | None = None
    arc_center: tuple[float, float, float] | None = None
    arc_sense: str | None = None  # "CW" | "CCW"


@dataclass(frozen=True)
class Annotation:
    """Non-motion word passed through untouched (spindle, tool, program stop)."""

    source_line: int
    word: str


# --- tokenizer ---------------------------------------------------------------


def _strip_comments(line: str, lineno: int) -> str:
    out = []
    depth_start = None
    for col, ch in enumerate(line):
        if depth_start is not None:
            out.append(" ")
            if ch == ")":
                depth_start = None
            continue
        if ch == "(":
            depth_start = col
            out.append(" ")
        elif ch == ";":
            break
        else:
            out.append(ch)
    if depth_start is not None:
        raise LexError(lineno, depth_start + 1, line[depth_start:], "unterminated comment")
    return "".join(out)


def tokenize(text: str) -> list[Block]:
    """Split program text into blocks of words, one block per non-empty line."""
    blocks = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = _strip_comments(raw, lineno)
        if line.strip() in ("", "%"):
            continue
        words: list[Word] = []
        pos = 0
        while pos < len(line):
            ch = line[pos]
            if ch.isspace():
                pos += 1
                continue
            letter = ch.upper()
            if letter not in LETTERS:
                raise LexError(lineno, pos + 1, line[pos:].strip()[:12])
            m = _NUMBER.match(line, pos + 1)
            if m is None:
                raise LexError(lineno, pos + 1, line[pos : pos + 8].strip(), "missing number")
            end = m.end()
            if end < len(line) and (line[end].isdigit() or line[end] in ".+-"):
                frag = re.match(r"\S+", line[pos:]).group(0)
                raise LexError(lineno, pos + 1, frag, "malformed number")
            value = float(m.group(0))
            if not math.isfinite(value):
                raise LexError(lineno, pos + 1, m.group(0), "malformed number")
            words.append(Word(letter, value, pos + 1))
            pos = end
        blocks.append(_make_block(words, lineno))
    return blocks


def _make_block(words: list[Word], lineno: int) -> Block:
    line_number = None
    kept = []
    seen = set()
    motion = 0
    for w in words:
        if w.letter == "N":
            if line_number is not None or w.value != int(w.value):
                raise LexError(lineno, w.column, str(w), "bad line number")
            line_number = int(w.value)
            continue
        if w.letter == "G":
            if w.value in MOTION_G:
                motion += 1
                if motion > 1:
                    raise LexError(lineno, w.column, str(w), "second motion word in block")
        elif w.letter != "M":
            if w.letter in seen:
                raise LexError(lineno, w.column, str(w), "repeated word")
            seen.add(w.letter)
        kept.append(w)
    return Block(tuple(kept), lineno, line_number)


# --- interpreter -------------------------------------------------------------


class Interpreter:
    """Applies modal semantics block by block.

    After :meth:`run`, ``state`` holds the final modal state and
    ``annotations`` the pass-through M/S/T words in program order.
    """

    def __init__(self, initial: ModalState | None = None):
        self.state = initial or ModalState()
        self.annotations: list[Annotation] = []
        self.ended = False

    def run(self, blocks: Iterable[Block]) -> list[MotionCommand]:
        commands = []
        for block in blocks:
            if self.ended:
                break
            cmd = self.step(block)
            if cmd is not None:
                commands.append(cmd)
        return commands

    def step(self, block: Block) -> MotionCommand | None:
        line = block.source_line
        st = self.state
        motion = st.motion_mode
        for w in block.words:
            if w.letter == "G":
                code = _int_code(w, line)
                if code in MOTION_G:
                    motion = MOTION_G[code]
                elif code == 17:
                    st = replace(st, plane="XY")
                elif code == 20:
                    st = replace(st, units="inch")
                elif code == 21:
                    st = replace(st, units="mm")
                elif code == 90:
                    st = replace(st, distance_mode="absolute")
                elif code == 91:
                    st = replace(st, distance_mode="incremental")
            elif w.letter == "M":
                code = _int_code(w, line)
                if code not in SUPPORTED_M:
                    raise UnsupportedCode(line, str(w))
                self.annotations.append(Annotation(line, str(w)))
                if code in PROGRAM_END_M:
                    self.ended = True
            elif w.letter in "ST":
                self.annotations.append(Annotation(line, str(w)))
            elif w.letter == "K":
                raise UnsupportedCode(line, f"{w} (K offset in XY plane)")
        scale = MM_PER_INCH if st.units == "inch" else 1.0
        f = block.get("F")
        if f is not None:
            if f.value <= 0:
                raise ModalError(line, "feed rate must be positive")
            st = replace(st, feed_rate=f.value * scale)
        st = replace(st, motion_mode=motion)

        has_axis = any(block.get(a) is not None for a in AXES)
        has_arc_words = any(block.get(a) is not None for a in "IJR")
        self.state = st
        if not has_axis and not (has_arc_words and motion in ("arc_cw", "arc_ccw")):
            if has_arc_words:
                raise ModalError(line, "I/J/R words outside an arc move")
            return None
        if motion is None:
            raise ModalError(line, "coordinates given with no active motion mode")
        if motion != "rapid" and st.feed_rate is None:
            raise MissingFeed(line)
        if motion in ("rapid", "linear") and has_arc_words:
            raise ModalError(line, "I/J/R words outside an arc move")

        inc = st.distance_mode == "incremental"
        point = []
        for k, a in enumerate("XYZ"):
            w = block.get(a)
            cur = st.current_point[k]
            point.append(cur if w is None else (cur + w.value * scale if inc else w.value * scale))
        angles = []
        for k, a in enumerate("ABC"):
            w = block.get(a)
            cur = st.current_orientation[k]
            angles.append(cur if w is None else (cur + w.value if inc else w.value))

        center = sense = None
        if motion in ("arc_cw", "arc_ccw"):
            sense = "CW" if motion == "arc_cw" else "CCW"
            center = _arc_center(block, st.current_point, point, sense, scale, line)

        self.state = replace(st, current_point=tuple(point), current_orientation=tuple(angles))
        target = PlatformPose(
            tuple(v / 1000.0 for v in point),
            tuple(math.radians(v) for v in angles),
        )
        feed = None if motion == "rapid" else st.feed_rate / 60000.0
        kind = {"rapid": "rapid", "linear": "linear"}.get(motion, "arc")
        return MotionCommand(
            kind=kind,
            target=target,
            source_line=line,
            feed=feed,
            arc_center=None if center is None else tuple(v / 1000.0 for v in center),
            arc_sense=sense,
        )


def _arc_center(block: Block, start, end, sense: str, scale: float, line: int):
    i, j, r = block.get("I"), block.get("J"), block.get("R")
    sx, sy, sz = start
    ex, ey = end[0], end[1]
    if r is not None and (i is not None or j is not None):
        raise BadArc(line, 0.0, "arc gives both R and I/J")
    if r is not None:
        radius = r.value * scale
        dx, dy = ex - sx, ey - sy
        chord = math.hypot(dx, dy)
        if chord == 0.0:
            raise BadArc(line, 0.0, "R-form arc needs distinct start and end points")
        if radius == 0.0:
            raise BadArc(line, 0.0, "zero arc radius")
        half = chord / 2.0
        if abs(radius) < half - ARC_RADIUS_TOL_MM:
            raise BadArc(line, half - abs(radius), f"radius {abs(radius):.6f} mm shorter than half chord")
        h = math.sqrt(max(radius * radius - half * half, 0.0))
        # center to the right of travel for a short CW arc, to the left for CCW
        side = -1.0 if sense == "CW" else 1.0
        if radius < 0:
            side = -side
        nx, ny = -dy / chord, dx / chord
        return (sx + dx / 2.0 + side * h * nx, sy + dy / 2.0 + side * h * ny, sz)
    if i is None and j is None:
        raise BadArc(line, 0.0, "arc needs I/J or R")
    cx = sx + (i.value * scale if i is not None else 0.0)
    cy = sy + (j.value * scale if j is not None else 0.0)
    r_start = math.hypot(sx - cx, sy - cy)
    r_end = math.hypot(ex - cx, ey - cy)
    if r_start == 0.0:
        raise BadArc(line, 0.0, "zero arc radius")
    if abs(r_start - r_end) > ARC_RADIUS_TOL_MM:
        raise BadArc(line, abs(r_start - r_end))
    return (cx, cy, sz)


def _int_code(w: Word, line: int) -> int:
    if w.value != int(w.value):
        raise UnsupportedCode(line, str(w))
    code = int(w.value)
    if w.letter == "G" and code not in MOTION_G and code not in MODAL_G:
        raise UnsupportedCode(line, str(w))
    return code


def interpret(blocks: Sequence[Block], initial: ModalState | None = None) -> list[MotionCommand]:
    """Resolve blocks into motion commands. Stops at M2/M30."""
    return Interpreter(initial).run(blocks)


def parse_program(text: str, initial: ModalState | None = None) -> list[MotionCommand]:
    return interpret(tokenize(text), initial)


# --- canonical serializer ----------------------------------------------------


def _fmt_code(v: float) -> str:
    return str(int(v)) if v == int(v) else repr(v)


def _f4(v: float) -> str:
    s = f"{v:.4f}"
    return "0.0000" if s == "-0.0000" else s


def to_gcode(commands: Sequence[MotionCommand], start_mm: Sequence[float] = (0.0, 0.0, 0.0)) -> str:
    """Canonical absolute-millimetre program: one command per line, 4 decimals.

    Rounding to 0.1 micrometre means a first pass over arbitrary source may
    move coordinates by up to 5e-5 mm; from then on the text is a fixed point.
    """
    lines = ["G21 G90 G17"]
    cur = [float(v) for v in start_mm]
    for c in commands:
        x, y, z = (v * 1000.0 for v in c.target.position)
        a, b, cc = (math.degrees(v) for v in c.target.orientation)
        head = {"rapid": "G0", "linear": "G1"}.get(c.kind) or ("G2" if c.arc_sense == "CW" else "G3")
        parts = [head] + [f"{k}{_f4(v)}" for k, v in zip(AXES, (x, y, z, a, b, cc))]
        if c.kind == "arc":
            parts.append(f"I{_f4(c.arc_center[0] * 1000.0 - cur[0])}")
            parts.append(f"J{_f4(c.arc_center[1] * 1000.0 - cur[1])}")
        if c.feed is not None:
            parts.append(f"F{_f4(c.feed * 60000.0)}")
        lines.append(" ".join(parts))
        cur = [x, y, z]
    return "\n".join(lines) + "\n"
