import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hexakine.drive import (
    DriveConfig,
    DriveStream,
    dac_output_voltage,
    dequantize,
    emit,
    frames_twin_path,
    quantize,
    read_frames,
    replay,
    replay_error_bound,
    round_half_away,
    velocity_to_voltage,
    write_frames,
)
from hexakine.errors import ConfigError, RailOverrun
from hexakine.gcode import parse_program
from hexakine.planner import JointTrajectory, plan, resample

CFG = DriveConfig()


def test_reference_codes():
    assert int(quantize(0.0, CFG)) == 2048
    assert int(quantize(10.0, CFG)) == 4095
    assert int(quantize(-10.0, CFG)) == 0
    assert float(dequantize(4095, CFG)) == pytest.approx(10.0, abs=1e-12)
    assert float(dequantize(0, CFG)) == pytest.approx(-10.0, abs=1e-12)
    assert CFG.lsb_voltage / 2 == pytest.approx(10.0 / 4095)


def test_amplifier_chain():
    assert CFG.dac_fullscale * CFG.opamp_gain == pytest.approx(10.0, abs=1e-12)
    assert float(dac_output_voltage(4095, CFG)) * CFG.opamp_gain == pytest.approx(10.0)


def test_round_half_away():
    assert list(round_half_away([0.5, 1.5, 2.5, -0.5, -1.5, 0.49])) == [1, 2, 3, -1, -2, 0]


def test_quantize_matches_exhaustive_nearest_code():
    v = np.linspace(-10.0, 10.0, 20001)
    codes = quantize(v, CFG)
    table = dequantize(np.arange(4096), CFG)
    nearest = np.argmin(np.abs(v[:, None] - table[None, :]), axis=1)
    # ties may go either way in the oracle's argmin; both are equally near
    dist_ours = np.abs(v - table[codes])
    dist_best = np.abs(v - table[nearest])
    assert np.allclose(dist_ours, dist_best, atol=1e-12)
    assert np.max(dist_ours) <= CFG.lsb_voltage / 2 + 1e-12


@given(st.floats(-10.0, 10.0))
@settings(max_examples=300)
def test_quantization_error_within_half_lsb(v):
    assert abs(float(dequantize(quantize(v, CFG), CFG)) - v) <= CFG.lsb_voltage / 2 + 1e-12


def test_quantize_monotone_and_near_symmetric():
    v = np.linspace(-12.0, 12.0, 4801)
    codes = quantize(v, CFG)
    assert np.all(np.diff(codes) >= 0)
    mirrored = CFG.max_code - quantize(-v, CFG)
    assert np.max(np.abs(codes - mirrored)) <= 1


def test_velocity_clamping_counted(geom):
    t = np.arange(3) * 1e-3
    qd = np.array([[0.0] * 6, [0.6, -0.6, 0.1, 0, 0, 0], [0.0] * 6])
    traj = JointTrajectory(t, None, np.zeros((3, 6)), qd, np.zeros(3, dtype=np.int64))
    stream = emit(traj)
    assert stream.clamped == 2
    assert tuple(stream.codes[1, :2]) == (4095, 0)
    assert np.allclose(velocity_to_voltage([1.0, -1.0], CFG), [10.0, -10.0])


def test_emit_rejects_non_uniform_time():
    t = np.array([0.0, 1e-3, 3e-3])
    traj = JointTrajectory(t, None, np.zeros((3, 6)), np.zeros((3, 6)), np.zeros(3, dtype=np.int64))
    with pytest.raises(ValueError):
        emit(traj)


def _hand_stream(volts, dt=1e-3):
    volts = np.asarray(volts, dtype=float)
    n = len(volts)
    return DriveStream(np.arange(n) * dt, quantize(volts, CFG), volts, 1 / dt, 12)


def test_replay_zero_voltage_holds_position(geom):
    q0 = geom.rail_travel.mean(axis=1)
    out = replay(_hand_stream(np.zeros((500, 6))), geom, CFG, q0)
    assert np.array_equal(out.joints, np.tile(q0, (500, 1)))


def test_replay_full_scale_one_second(geom):
    q0 = geom.rail_travel[:, 0] + 0.01
    volts = np.zeros((1001, 6))
    volts[:, 3:] = 10.0
    out = replay(_hand_stream(volts), geom, CFG, q0)
    # forward sliders: rear ones start at -0.69, front ones at 0.06
    assert out.joints[-1, 3:] - q0[3:] == pytest.approx([0.5] * 3, abs=1e-12)
    assert np.array_equal(out.joints[-1, :3], q0[:3])


def test_replay_rail_overrun(geom):
    q0 = geom.rail_travel[:, 1] - 0.001
    volts = np.full((100, 6), 10.0)
    with pytest.raises(RailOverrun) as info:
        replay(_hand_stream(volts), geom, CFG, q0)
    # 0.5 mm per frame from 1 mm inside: frame 2 lands on the limit, frame 3 is past it
    assert info.value.frame == 3
    assert info.value.limb == 1


def test_emit_replay_within_bound(geom):
    traj = resample(plan(parse_program("G1 X5 Y3 F600\nG2 X5 Y3 I-2 J0"), geom), geom)
    stream = emit(traj)
    assert stream.clamped == 0
    back = replay(stream, geom, CFG, traj.joints[0])
    err = float(np.max(np.abs(back.joints - traj.joints)))
    assert err <= replay_error_bound(traj, CFG)


def test_frames_iterate(geom):
    stream = _hand_stream(np.zeros((3, 6)))
    frames = list(stream)
    assert len(frames) == 3 and frames[1].dac_code == (2048,) * 6
    assert frames[2].t == pytest.approx(2e-3)


def test_binary_layout_and_round_trip(tmp_path):
    volts = np.linspace(-10, 10, 60).reshape(10, 6)
    stream = _hand_stream(volts)
    path = tmp_path / "frames.bin"
    twin = write_frames(stream, path)
    assert twin == frames_twin_path(path) == tmp_path / "frames.bin.csv"
    data = path.read_bytes()
    assert len(data) == 16 + 20 * 10
    magic, bits, joints, rate = struct.unpack_from("<4sHHd", data)
    assert (magic, bits, joints, rate) == (b"HXG1", 12, 6, pytest.approx(1000.0))
    t1, *codes1 = struct.unpack_from("<d6H", data, 16 + 20)
    assert t1 == pytest.approx(1e-3) and tuple(codes1) == tuple(stream.codes[1])
    back = read_frames(path)
    assert np.array_equal(back.codes, stream.codes)
    assert np.array_equal(back.t, stream.t)
    lines = twin.read_text().splitlines()
    assert len(lines) == 11 and lines[0].startswith("t,code1")


def test_read_frames_rejects_garbage(tmp_path):
    path = tmp_path / "x.bin"
    path.write_bytes(b"nope")
    with pytest.raises(ValueError):
        read_frames(path)
    path.write_bytes(struct.pack("<4sHHd", b"HXG1", 12, 6, 1000.0) + b"\0" * 7)
    with pytest.raises(ValueError):
        read_frames(path)


def test_drive_config_validation():
    with pytest.raises(ConfigError):
        DriveConfig(opamp_gain=3.0)
    with pytest.raises(ConfigError):
        DriveConfig(dac_bits=4)
    with pytest.raises(ConfigError):
        DriveConfig().with_overrides({"nope": "1"})
    cfg = DriveConfig().with_overrides({"driver_fullscale": "5"})
    assert cfg.dac_fullscale * cfg.opamp_gain == pytest.approx(5.0)
    cfg16 = DriveConfig().with_overrides({"dac_bits": "16"})
    assert int(quantize(0.0, cfg16)) == 32768
