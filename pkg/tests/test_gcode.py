import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hexakine.errors import BadArc, LexError, MissingFeed, ModalError, UnsupportedCode
from hexakine.gcode import ARC_RADIUS_TOL_MM, Interpreter, ModalState, Word, parse_program, to_gcode, tokenize


def words(block):
    return [(w.letter, w.value) for w in block.words]


# --- tokenizer ---------------------------------------------------------------


def test_tokenize_basic():
    blocks = tokenize("G1 X10.5 Y-2 F300")
    assert len(blocks) == 1
    assert words(blocks[0]) == [("G", 1), ("X", 10.5), ("Y", -2), ("F", 300)]


def test_tokenize_case_and_comments():
    blocks = tokenize("g0x5 (rapid) ; comment")
    assert words(blocks[0]) == [("G", 0), ("X", 5)]


def test_tokenize_malformed_number():
    with pytest.raises(LexError) as info:
        tokenize("G1 X1..2")
    assert info.value.line == 1
    assert info.value.column == 4
    assert "X1..2" in info.value.fragment


@pytest.mark.parametrize("text", ["G1 X5 @", "G1 X", "G1 Q5", "G1 (open comment", "G1 X5 Y"])
def test_tokenize_errors(text):
    with pytest.raises(LexError):
        tokenize(text)


def test_tokenize_skips_blank_and_percent_lines_keeps_provenance():
    blocks = tokenize("%\r\n\r\n(only comment)\r\nN10 G1 X1 F10\r\n; c\r\nY2\r\n%")
    assert [b.source_line for b in blocks] == [4, 6]
    assert blocks[0].line_number == 10
    assert words(blocks[0]) == [("G", 1), ("X", 1), ("F", 10)]


def test_tokenize_leading_decimal_and_plus():
    assert words(tokenize("X.5 Y+2. Z-.25")[0]) == [("X", 0.5), ("Y", 2.0), ("Z", -0.25)]


def test_block_rejects_two_motion_words():
    with pytest.raises(LexError):
        tokenize("G0 G1 X5")


def test_block_rejects_repeated_axis():
    with pytest.raises(LexError):
        tokenize("G1 X1 X2")


def test_word_str():
    assert str(Word("G", 1.0)) == "G1"
    assert str(Word("X", 2.5)) == "X2.5"


# --- interpreter -------------------------------------------------------------


def test_rapid_target():
    (cmd,) = parse_program("G0 X10 Y5")
    assert cmd.kind == "rapid"
    assert cmd.feed is None
    assert cmd.target.position == pytest.approx((0.010, 0.005, 0.0))


def test_modal_persistence():
    a, b = parse_program("G1 X10 F200\nY5")
    assert a.kind == b.kind == "linear"
    assert b.target.position == pytest.approx((0.010, 0.005, 0.0))
    assert a.feed == b.feed == pytest.approx(200 / 60000)
    assert (a.source_line, b.source_line) == (1, 2)


def test_arc_ij_half_circle():
    (cmd,) = parse_program("G2 X10 Y0 I5 J0 F100")
    assert cmd.kind == "arc" and cmd.arc_sense == "CW"
    assert cmd.arc_center == pytest.approx((0.005, 0.0, 0.0))
    start_r = math.hypot(0 - 5, 0)
    end_r = math.hypot(10 - 5, 0)
    assert start_r == end_r == 5


@pytest.mark.parametrize(
    "program, sense, expect_long",
    [
        ("G2 X10 Y0 R5 F100", "CW", False),
        ("G2 X6 Y6 R6 F100", "CW", False),
        ("G2 X6 Y6 R-6 F100", "CW", True),
        ("G3 X6 Y6 R6 F100", "CCW", False),
        ("G3 X6 Y6 R-6 F100", "CCW", True),
    ],
)
def test_r_form_picks_short_or_long_arc(program, sense, expect_long):
    (cmd,) = parse_program(program)
    cx, cy = (v * 1000 for v in cmd.arc_center[:2])
    ex, ey = (v * 1000 for v in cmd.target.position[:2])
    th0 = math.atan2(-cy, -cx)
    th1 = math.atan2(ey - cy, ex - cx)
    sweep = (th0 - th1) % (2 * math.pi) if sense == "CW" else (th1 - th0) % (2 * math.pi)
    assert math.hypot(cx, cy) == pytest.approx(math.hypot(ex - cx, ey - cy), abs=1e-9)
    assert (sweep > math.pi + 1e-9) == expect_long
    assert cmd.arc_sense == sense


def test_inch_and_incremental():
    cmds = parse_program("G20 G91\nG1 X1 F10\nX1\nG21 G90\nG1 X0")
    assert cmds[0].target.position[0] == pytest.approx(0.0254)
    assert cmds[1].target.position[0] == pytest.approx(0.0508)
    assert cmds[0].feed == pytest.approx(254 / 60000)
    assert cmds[2].target.position[0] == 0.0


def test_rotary_words_are_degrees():
    (cmd,) = parse_program("G1 A90 B-45 C30 F100")
    assert cmd.target.orientation == pytest.approx((math.pi / 2, -math.pi / 4, math.pi / 6))


def test_annotations_and_program_end():
    interp = Interpreter()
    cmds = interp.run(tokenize("M3 S1000\nT2\nG1 X1 F5\nM5\nM30\nG1 X9"))
    assert len(cmds) == 1
    assert [(a.source_line, a.word) for a in interp.annotations] == [(1, "M3"), (1, "S1000"), (2, "T2"), (4, "M5"), (5, "M30")]
    assert interp.ended


def test_initial_state_is_used():
    start = ModalState(current_point=(1.0, 2.0, 3.0), feed_rate=100.0, motion_mode="linear")
    (cmd,) = Interpreter(start).run(tokenize("X4"))
    assert cmd.target.position == pytest.approx((0.004, 0.002, 0.003))


@pytest.mark.parametrize(
    "program, error, line",
    [
        ("G1 X1 F10\nG41 X2", UnsupportedCode, 2),
        ("G54", UnsupportedCode, 1),
        ("G18", UnsupportedCode, 1),
        ("M8", UnsupportedCode, 1),
        ("G1.5 X1", UnsupportedCode, 1),
        ("G1 X5", MissingFeed, 1),
        ("G0 X1\nG2 X2 Y0 I0.5", MissingFeed, 2),
        ("G2 X10 Y0 I3 J0 F100", BadArc, 1),
        ("G2 X10 Y0 F100", BadArc, 1),
        ("G2 X0 Y0 R5 F100", BadArc, 1),
        ("G2 X10 Y0 R2 F100", BadArc, 1),
        ("G2 X10 Y0 R5 I5 F100", BadArc, 1),
        ("G2 X1 Y1 I0 J0 F100", BadArc, 1),
        ("X5", ModalError, 1),
        ("G1 X1 F0", ModalError, 1),
        ("G1 X1 I2 F10", ModalError, 1),
        ("G2 X1 Y0 I0.5 K1 F10", UnsupportedCode, 1),
    ],
)
def test_interpret_errors_name_their_line(program, error, line):
    with pytest.raises(error) as info:
        parse_program(program)
    assert info.value.line == line


def test_unsupported_message():
    with pytest.raises(UnsupportedCode, match="G41 unsupported"):
        parse_program("G41")


def test_arc_radius_tolerance_boundary():
    parse_program(f"G2 X{10 + 0.9 * ARC_RADIUS_TOL_MM:.6f} Y0 I5 J0 F100")
    with pytest.raises(BadArc):
        parse_program(f"G2 X{10 + 2 * ARC_RADIUS_TOL_MM:.6f} Y0 I5 J0 F100")


def test_non_motion_blocks_emit_nothing():
    assert parse_program("G21 G90\nF300\nG1\nG0") == []


# --- corpus-wide properties --------------------------------------------------


# 4-decimal millimetres: half a unit in the last place, in metres (and degrees -> rad)
ROUNDING = 5e-8
ROUNDING_RAD = math.radians(5e-5)


def _same(a, b, exact=False):
    assert len(a) == len(b)
    for x, y in zip(a, b):
        if exact:
            assert x == y
            continue
        assert x.kind == y.kind and x.arc_sense == y.arc_sense
        assert x.target.position == pytest.approx(y.target.position, abs=ROUNDING + 1e-15)
        assert x.target.orientation == pytest.approx(y.target.orientation, abs=ROUNDING_RAD)
        assert (x.feed is None) == (y.feed is None)
        if x.feed is not None:
            assert x.feed == pytest.approx(y.feed, abs=5e-5 / 60000 + 1e-15)
        if x.arc_center is not None:
            # centre is rebuilt from a rounded start plus rounded I/J offsets
            assert x.arc_center == pytest.approx(y.arc_center, abs=2 * ROUNDING + 1e-15)


def test_reserialization_is_idempotent_on_corpus(corpus_programs):
    for path in corpus_programs:
        cmds = parse_program(path.read_text())
        text = to_gcode(cmds)
        once = parse_program(text)
        # first pass: equal up to the 4-decimal rounding
        _same(cmds, once)
        # canonical text has a header line, so its commands start on line 2
        assert [c.source_line for c in once] == list(range(2, len(once) + 2))
        # canonical form: identical command list and identical text
        twice = parse_program(to_gcode(once))
        _same(once, twice, exact=True)
        assert to_gcode(twice) == text


def test_canonical_text_is_exact_for_four_decimal_sources():
    src = "G21 G90\nG1 X1.2345 Y-2.5 Z0.125 A1.5 F300\nG2 X3.2345 Y-2.5 I1 J0\n"
    cmds = parse_program(src)
    again = parse_program(to_gcode(cmds))
    assert [c.target for c in again] == [c.target for c in cmds]
    for a, b in zip(again, cmds):
        assert a.feed == b.feed
        if b.arc_center is not None:
            assert a.arc_center == pytest.approx(b.arc_center, abs=1e-15)


def test_every_command_fully_resolved_and_arcs_consistent(corpus_programs):
    for path in corpus_programs:
        src_lines = path.read_text().splitlines()
        for cmd in parse_program(path.read_text()):
            assert len(cmd.target.as_array()) == 6
            assert cmd.source_line >= 1 and src_lines[cmd.source_line - 1].strip()
            if cmd.kind == "arc":
                assert cmd.arc_center is not None and cmd.arc_sense in ("CW", "CCW")


def test_arc_radius_consistency_on_corpus(corpus_programs):
    for path in corpus_programs:
        start = (0.0, 0.0)
        for cmd in parse_program(path.read_text()):
            end = cmd.target.position[:2]
            if cmd.kind == "arc":
                c = cmd.arc_center
                r0 = math.hypot(start[0] - c[0], start[1] - c[1]) * 1000
                r1 = math.hypot(end[0] - c[0], end[1] - c[1]) * 1000
                assert abs(r0 - r1) <= ARC_RADIUS_TOL_MM
            start = end


coord = st.integers(-200000, 200000).map(lambda v: v / 10000)
moves = st.lists(
    st.tuples(st.sampled_from(["G0", "G1"]), coord, coord, coord, st.integers(1, 5000)),
    min_size=1,
    max_size=8,
)


@given(moves)
@settings(max_examples=60, deadline=None)
def test_reserialization_random_programs(ms):
    text = "\n".join(f"{g} X{x} Y{y} Z{z} F{f}" for g, x, y, z, f in ms)
    cmds = parse_program(text)
    canon = to_gcode(cmds)
    once = parse_program(canon)
    assert once == parse_program(to_gcode(once))
    assert to_gcode(once) == canon
