"""Motion data tests: BVH round trips, exponential-map rotations, root
velocity channels, fps/audio resampling, clip segmentation, standardization,
and the DIMG gesture interchange format.

Rotation oracles go through scipy.spatial.transform (matrices, slerp) so the
hand-written expmap code is checked against an independent implementation.
"""

import math
import struct

import numpy as np
import pytest
from scipy.spatial.transform import Rotation, Slerp

from gesturegen import rng as rngmod
from gesturegen.errors import BvhParseError, FormatError, ShapeError
from gesturegen.motion import (
    ChannelStats,
    ClipPair,
    GestureSequence,
    Skeleton,
    compute_stats,
    destandardize,
    fix_antipodal,
    format_bvh,
    from_expmap,
    gesture_from_bvh,
    integrate_root,
    load_dimg,
    parse_bvh,
    resample_audio,
    resample_fps,
    root_velocities,
    save_dimg,
    segment_clips,
    standardize,
    to_expmap,
    write_bvh,
)

MINIMAL_BVH = """HIERARCHY
ROOT Hips
{
\tOFFSET 0.000000 0.000000 0.000000
\tCHANNELS 6 Xposition Yposition Zposition Zrotation Xrotation Yrotation
\tJOINT Spine
\t{
\t\tOFFSET 0.000000 10.000000 0.000000
\t\tCHANNELS 3 Zrotation Xrotation Yrotation
\t\tEnd Site
\t\t{
\t\t\tOFFSET 0.000000 5.000000 0.000000
\t\t}
\t}
}
MOTION
Frames: 1
Frame Time: 0.050000
0.0 0.0 0.0 0.0 0.0 0.0 0.0 0.0 0.0
"""


def build_walk_bvh(frames=120, fps=60.0, speed=1.0):
    """Synthetic 3-joint rig: root slides along +X, two joints oscillate."""
    header = """HIERARCHY
ROOT Hips
{
\tOFFSET 0.000000 0.000000 0.000000
\tCHANNELS 6 Xposition Yposition Zposition Zrotation Xrotation Yrotation
\tJOINT Spine
\t{
\t\tOFFSET 0.000000 10.000000 0.000000
\t\tCHANNELS 3 Zrotation Xrotation Yrotation
\t\tJOINT Arm
\t\t{
\t\t\tOFFSET 5.000000 0.000000 0.000000
\t\t\tCHANNELS 3 Zrotation Xrotation Yrotation
\t\t\tEnd Site
\t\t\t{
\t\t\t\tOFFSET 0.000000 3.000000 0.000000
\t\t\t}
\t\t}
\t}
}
MOTION
"""
    rows = []
    for t in range(frames):
        x = speed * t / fps
        spine = 20.0 * math.sin(2 * math.pi * t / frames)
        arm = 35.0 * math.cos(2 * math.pi * t / frames)
        rows.append(f"{x:.6f} 0.000000 0.000000 0.000000 0.000000 0.000000 "
                    f"{spine:.6f} 0.000000 0.000000 {arm:.6f} 0.000000 0.000000")
    return (header + f"Frames: {frames}\nFrame Time: {1.0 / fps:.8f}\n"
            + "\n".join(rows) + "\n")


def frob(a, b):
    return float(np.max(np.sqrt(np.sum((a - b) ** 2, axis=(-2, -1)))))


class TestParseBvh:
    def test_minimal_fixture(self):
        skeleton, motion, src_fps = parse_bvh(MINIMAL_BVH)
        assert [j.name for j in skeleton.joints] == ["Hips", "Spine"]
        assert [j.parent for j in skeleton.joints] == [-1, 0]
        assert skeleton.joints[1].offset.tolist() == [0.0, 10.0, 0.0]
        assert skeleton.joints[0].channels == [
            "Xposition", "Yposition", "Zposition",
            "Zrotation", "Xrotation", "Yrotation"]
        assert skeleton.joints[1].channels == ["Zrotation", "Xrotation", "Yrotation"]
        assert len(skeleton.end_sites) == 1
        assert skeleton.end_sites[0][0] == 1
        assert skeleton.rotation_channels == 6
        assert motion.shape == (1, 9)
        assert np.all(motion == 0)
        assert src_fps == pytest.approx(20.0, rel=1e-9)

    def test_frame_count_mismatch(self):
        bad = MINIMAL_BVH.replace("Frames: 1", "Frames: 2")
        with pytest.raises(BvhParseError, match="line"):
            parse_bvh(bad)

    def test_row_width_mismatch(self):
        bad = MINIMAL_BVH.replace("0.0 0.0 0.0 0.0 0.0 0.0 0.0 0.0 0.0",
                                  "0.0 0.0 0.0")
        with pytest.raises(BvhParseError, match="line"):
            parse_bvh(bad)

    def test_missing_brace(self):
        bad = MINIMAL_BVH.replace("\tCHANNELS 6", "}\n\tCHANNELS 6")
        with pytest.raises(BvhParseError):
            parse_bvh(bad)

    def test_channel_count_mismatch(self):
        bad = MINIMAL_BVH.replace("CHANNELS 6 Xposition", "CHANNELS 5 Xposition")
        with pytest.raises(BvhParseError):
            parse_bvh(bad)

    def test_unknown_channel_name(self):
        bad = MINIMAL_BVH.replace("Zrotation Xrotation Yrotation\n\t\tEnd",
                                  "Zrotation Xrotation Wrotation\n\t\tEnd")
        with pytest.raises(BvhParseError):
            parse_bvh(bad)

    def test_missing_motion_section(self):
        bad = MINIMAL_BVH.split("MOTION")[0]
        with pytest.raises(BvhParseError):
            parse_bvh(bad)


class TestFormatRoundTrip:
    def test_walk_round_trip(self):
        text = build_walk_bvh()
        skeleton, motion, fps = parse_bvh(text)
        text2 = format_bvh(skeleton, motion, fps)
        skeleton2, motion2, fps2 = parse_bvh(text2)
        assert [j.name for j in skeleton2.joints] == [j.name for j in skeleton.joints]
        assert [j.parent for j in skeleton2.joints] == [j.parent for j in skeleton.joints]
        assert [j.channels for j in skeleton2.joints] == [j.channels for j in skeleton.joints]
        for a, b in zip(skeleton.joints, skeleton2.joints):
            np.testing.assert_allclose(a.offset, b.offset, atol=1e-5)
        np.testing.assert_allclose(motion2, motion, atol=1e-5)
        assert fps2 == pytest.approx(fps, rel=1e-5)

    def test_skeleton_jsonable_round_trip(self):
        skeleton, _, _ = parse_bvh(build_walk_bvh(frames=2))
        clone = Skeleton.from_jsonable(skeleton.to_jsonable())
        assert [j.name for j in clone.joints] == [j.name for j in skeleton.joints]
        assert [j.parent for j in clone.joints] == [j.parent for j in skeleton.joints]
        for a, b in zip(skeleton.joints, clone.joints):
            assert np.array_equal(a.offset, b.offset)
            assert a.channels == b.channels
        assert clone.end_sites[0][0] == skeleton.end_sites[0][0]


class TestExpmap:
    def test_identity(self):
        out = to_expmap(np.zeros(3), "ZXY")
        assert np.all(out == 0)

    def test_quarter_turn_about_z(self):
        out = to_expmap(np.array([90.0, 0.0, 0.0]), "ZYX")
        np.testing.assert_allclose(out, [0.0, 0.0, math.pi / 2], atol=1e-12)

    def test_rodrigues_quarter_turn_matrix(self):
        R = from_expmap(np.array([math.pi / 2, 0.0, 0.0]))
        expect = np.array([[1.0, 0, 0], [0, 0, -1.0], [0, 1.0, 0]])
        np.testing.assert_allclose(R, expect, atol=1e-12)

    def test_zero_gives_identity_matrix(self):
        assert np.array_equal(from_expmap(np.zeros(3)), np.eye(3))

    @pytest.mark.parametrize("order", ["ZXY", "XYZ", "ZYX", "YZX"])
    def test_random_euler_round_trip(self, order):
        gen = rngmod.stream(1, f"euler-{order}")
        eulers = gen.uniform(-180.0, 180.0, size=(500, 3))
        R_oracle = Rotation.from_euler(order, eulers, degrees=True).as_matrix()
        R_mine = from_expmap(to_expmap(eulers, order))
        assert frob(R_mine, R_oracle) <= 1e-9

    def test_near_zero_and_near_pi_angles(self):
        gen = rngmod.stream(2, "angles")
        axes = gen.standard_normal((200, 3))
        axes /= np.linalg.norm(axes, axis=1, keepdims=True)
        small = 10.0 ** gen.uniform(-12, -6, 100)
        near_pi = math.pi - 10.0 ** gen.uniform(-9, -3, 100)
        thetas = np.concatenate([small, near_pi])
        e = axes * thetas[:, None]
        R = from_expmap(e)
        e2 = to_expmap(Rotation.from_matrix(R).as_euler("XYZ", degrees=True), "XYZ")
        assert np.all(np.linalg.norm(e2, axis=1) <= math.pi + 1e-9)
        assert frob(from_expmap(e2), R) <= 1e-9

    def test_canonical_magnitude(self):
        axis = np.array([0.6, 0.8, 0.0])
        e = 3.3 * axis  # angle beyond pi comes back as 2*pi - 3.3 flipped
        R = from_expmap(e)
        e2 = to_expmap(Rotation.from_matrix(R).as_euler("ZXY", degrees=True), "ZXY")
        assert np.linalg.norm(e2) == pytest.approx(2 * math.pi - 3.3, abs=1e-9)
        assert frob(from_expmap(e2), R) <= 1e-9

    def test_antipodal_continuity_fix(self):
        axis = np.array([1.0, 0.0, 0.0])
        thetas = np.linspace(2.9, 3.5, 13)  # sweeps through pi
        seq = []
        for th in thetas:
            if th <= math.pi:
                seq.append(th * axis)
            else:
                seq.append((th - 2 * math.pi) * axis)  # canonical flip
        seq = np.stack(seq)
        jumps = np.linalg.norm(np.diff(seq, axis=0), axis=1)
        assert jumps.max() > 5.0  # the raw canonical sequence really jumps
        fixed = fix_antipodal(seq)
        fixed_jumps = np.linalg.norm(np.diff(fixed, axis=0), axis=1)
        assert fixed_jumps.max() < 0.1
        assert frob(from_expmap(fixed), from_expmap(seq)) <= 1e-9


class TestRootVelocities:
    def test_stationary(self):
        positions = np.zeros((5, 3))
        orientations = np.tile(np.eye(3), (5, 1, 1))
        out = root_velocities(positions, orientations, fps=20.0)
        assert out.shape == (5, 6)
        assert np.all(out == 0)

    def test_constant_world_velocity(self):
        t = np.arange(8)
        positions = np.stack([t / 20.0, np.zeros(8), np.zeros(8)], axis=1)
        orientations = np.tile(np.eye(3), (8, 1, 1))
        out = root_velocities(positions, orientations, fps=20.0)
        np.testing.assert_allclose(out[:, :3], [[0.05, 0.0, 0.0]] * 8, atol=1e-12)
        np.testing.assert_allclose(out[:, 3:], 0.0, atol=1e-12)
        assert np.array_equal(out[0], out[1])

    def test_heading_removal(self):
        # Facing +X while moving +X: local frame sees pure forward (+Z) motion.
        t = np.arange(6)
        positions = np.stack([0.1 * t, np.zeros(6), np.zeros(6)], axis=1)
        heading = Rotation.from_euler("Y", 90, degrees=True).as_matrix()
        orientations = np.tile(heading, (6, 1, 1))
        out = root_velocities(positions, orientations, fps=20.0)
        np.testing.assert_allclose(out[:, :3], [[0.0, 0.0, 0.1]] * 6, atol=1e-12)

    def test_too_short(self):
        with pytest.raises(ValueError):
            root_velocities(np.zeros((1, 3)), np.tile(np.eye(3), (1, 1, 1)), 20.0)

    def test_circle_integrates_back(self):
        frames = 100
        radius = 2.0
        theta = math.pi * np.arange(frames) / (frames - 1)  # half circle
        positions = np.stack([radius * np.sin(theta), np.zeros(frames),
                              radius * np.cos(theta)], axis=1)
        phi = theta + math.pi / 2  # tangent heading
        orientations = Rotation.from_euler("Y", phi).as_matrix()
        vel = root_velocities(positions, orientations, fps=20.0)
        rec_pos, rec_phi = integrate_root(vel, initial_position=positions[0],
                                          initial_heading=phi[0])
        path_len = math.pi * radius
        assert np.linalg.norm(rec_pos[-1] - positions[-1]) <= 0.01 * path_len
        np.testing.assert_allclose(rec_pos, positions, atol=1e-9)
        wrapped = np.angle(np.exp(1j * (rec_phi - phi)))
        np.testing.assert_allclose(wrapped, 0.0, atol=1e-9)


class TestResampleFps:
    def _gesture(self, frames):
        return GestureSequence(frames=np.asarray(frames, dtype=np.float64),
                               fps=60.0)

    def test_identity(self):
        g = self._gesture(np.arange(9 * 10, dtype=np.float64).reshape(10, 9) * 0.01)
        out = resample_fps(g, 60.0)
        assert out.fps == 60.0
        assert np.array_equal(out.frames, g.frames)

    def test_integer_decimation(self):
        frames = np.tile(np.arange(10)[:, None] * 0.01, (1, 9))
        out = resample_fps(self._gesture(frames), 20.0)
        assert out.fps == 20.0
        assert np.array_equal(out.frames, frames[::3])

    def test_upsampling_rejected(self):
        g = self._gesture(np.zeros((4, 9)))
        with pytest.raises(ValueError):
            resample_fps(g, 120.0)

    def test_non_integer_ratio_sine(self):
        src, dst, seconds = 44.1, 20.0, 2.0
        t_src = np.arange(int(src * seconds)) / src
        frames = np.zeros((t_src.size, 9))
        sine = np.sin(2 * np.pi * 0.5 * t_src)
        frames[:, 0] = sine       # expmap channel (single axis -> angle interp)
        frames[:, 5] = sine       # velocity channel (plain linear interp)
        g = GestureSequence(frames=frames, fps=src)
        out = resample_fps(g, dst)
        t_dst = np.arange(out.frames.shape[0]) / dst
        assert t_dst[-1] <= t_src[-1] + 1e-9
        expect = np.sin(2 * np.pi * 0.5 * t_dst)
        assert np.max(np.abs(out.frames[:, 0] - expect)) <= 1e-3
        assert np.max(np.abs(out.frames[:, 5] - expect)) <= 1e-3

    def test_multi_axis_rotation_uses_slerp(self):
        frames = np.zeros((3, 9))
        frames[1, 0:3] = [math.pi / 2, 0.0, 0.0]
        frames[2, 0:3] = [0.0, math.pi / 2, 0.0]
        g = GestureSequence(frames=frames, fps=30.0)
        out = resample_fps(g, 20.0)  # output index 1 sits at source time 1.5
        rots = Rotation.from_matrix(from_expmap(frames[1:3, 0:3]))
        oracle = Slerp([0.0, 1.0], rots)(0.5).as_matrix()
        assert frob(from_expmap(out.frames[1, 0:3]), oracle) <= 1e-9
        # velocity block at the same index is a plain average of the brackets
        np.testing.assert_allclose(out.frames[1, 3:],
                                   0.5 * (frames[1, 3:] + frames[2, 3:]),
                                   atol=1e-12)


class TestResampleAudio:
    def test_silence_scaled_length(self):
        out = resample_audio(np.zeros(44100, dtype=np.float32))
        assert out.shape == (16000,)
        assert np.all(out == 0)

    def test_dc_preserved(self):
        out = resample_audio(np.ones(22050, dtype=np.float32))
        assert out.shape == (8000,)
        np.testing.assert_allclose(out, 1.0, atol=1e-3)

    def test_sine_thd(self):
        t = np.arange(44100) / 44100.0
        wave = np.sin(2 * np.pi * 1000.0 * t).astype(np.float32)
        out = resample_audio(wave)
        window = out[1000:1000 + 4000]  # 250 exact cycles at 16 kHz
        spec = np.abs(np.fft.rfft(window)) ** 2
        fundamental = spec[250]
        others = spec.sum() - fundamental - spec[0]
        assert others / fundamental <= 1e-6

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            resample_audio(np.zeros(0, dtype=np.float32))


class TestSegmentClips:
    def _gesture(self, seconds, fps=20.0, channels=9):
        frames = int(round(seconds * fps))
        data = np.arange(frames * channels, dtype=np.float32).reshape(frames, channels)
        return GestureSequence(frames=data, fps=fps)

    def test_45s_gives_two_clips(self):
        audio = np.arange(45 * 16000, dtype=np.float32)
        clips = segment_clips(self._gesture(45.0), audio, clip_s=20.0)
        assert len(clips) == 2
        for k, clip in enumerate(clips):
            assert clip.gesture.frames.shape[0] == 400
            assert clip.audio.shape[0] == 320000
            assert clip.audio[0] == k * 320000
            assert clip.gesture.frames[0, 0] == k * 400 * 9

    def test_exact_20s_single_clip(self):
        audio = np.zeros(320000, dtype=np.float32)
        clips = segment_clips(self._gesture(20.0), audio, clip_s=20.0)
        assert len(clips) == 1
        assert clips[0].gesture.frames.shape[0] == 400
        assert clips[0].audio.shape[0] == 320000

    def test_just_under_gives_none(self):
        audio = np.zeros(int(19.9 * 16000), dtype=np.float32)
        clips = segment_clips(self._gesture(19.9), audio, clip_s=20.0)
        assert clips == []

    def test_duration_law_holds_per_pair(self):
        audio = np.zeros(int(20.0 * 16000), dtype=np.float32)
        clips = segment_clips(self._gesture(20.05), audio, clip_s=10.0)
        assert len(clips) == 2
        for clip in clips:
            g_s = clip.gesture.frames.shape[0] / clip.gesture.fps
            a_s = clip.audio.shape[0] / clip.sample_rate
            assert abs(g_s - a_s) <= 1.0 / clip.gesture.fps


class TestStandardize:
    def test_round_trip(self):
        gen = rngmod.stream(3, "stats")
        x = (gen.standard_normal((200, 7)) + 0.5).astype(np.float32)
        stats = compute_stats([x])
        back = destandardize(standardize(x, stats), stats)
        np.testing.assert_allclose(back, x, atol=1e-6)

    def test_constant_channel_floors_sigma(self):
        x = np.full((50, 2), 4.25, dtype=np.float32)
        stats = compute_stats([x])
        assert np.all(stats.std == 1e-6)
        out = standardize(x, stats)
        assert np.all(out == 0)

    def test_two_pass_oracle(self):
        gen = rngmod.stream(4, "stats")
        a = gen.standard_normal((60, 5)) * 2.0
        b = gen.standard_normal((40, 5)) + 3.0
        stats = compute_stats([a, b])
        both = np.concatenate([a, b], axis=0)
        np.testing.assert_allclose(stats.mean, both.mean(axis=0), atol=1e-12)
        np.testing.assert_allclose(stats.std, both.std(axis=0), atol=1e-12)

    def test_stats_jsonable_round_trip(self):
        stats = ChannelStats(mean=np.array([1.0, 2.0]), std=np.array([0.5, 2.0]))
        clone = ChannelStats.from_jsonable(stats.to_jsonable())
        assert np.array_equal(clone.mean, stats.mean)
        assert np.array_equal(clone.std, stats.std)


class TestDimg:
    def test_round_trip(self, tmp_path):
        gen = rngmod.stream(5, "dimg")
        g = GestureSequence(frames=gen.standard_normal((17, 9)).astype(np.float32),
                            fps=20.0)
        path = tmp_path / "clip.dimg"
        save_dimg(path, g)
        loaded = load_dimg(path)
        assert np.array_equal(loaded.frames, g.frames)
        assert loaded.fps == 20.0

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.dimg"
        path.write_bytes(struct.pack("<4sIIIf", b"XIMG", 1, 1, 1, 20.0) + b"\x00" * 4)
        with pytest.raises(FormatError):
            load_dimg(path)

    def test_truncated_payload(self, tmp_path):
        path = tmp_path / "short.dimg"
        path.write_bytes(struct.pack("<4sIIIf", b"DIMG", 1, 3, 2, 20.0) + b"\x00" * 8)
        with pytest.raises(FormatError):
            load_dimg(path)


class TestGestureConversion:
    def test_walk_to_gesture(self):
        skeleton, motion, src_fps = parse_bvh(build_walk_bvh(frames=120, fps=60.0))
        g = gesture_from_bvh(skeleton, motion, src_fps, target_fps=20.0)
        assert g.fps == 20.0
        assert g.frames.shape == (40, 9 + 6)
        # Root slides +X at 1 unit/s with identity heading: 0.05 per frame.
        np.testing.assert_allclose(g.frames[:, 9:12], [[0.05, 0.0, 0.0]] * 40,
                                   atol=1e-5)
        np.testing.assert_allclose(g.frames[:, 12:15], 0.0, atol=1e-6)
        np.testing.assert_allclose(g.frames[:, 0:3], 0.0, atol=1e-6)
        spine_deg = 20.0 * np.sin(2 * np.pi * (3 * np.arange(40)) / 120)
        np.testing.assert_allclose(g.frames[:, 5], np.deg2rad(spine_deg), atol=1e-5)
        np.testing.assert_allclose(g.frames[:, 3:5], 0.0, atol=1e-6)

    def test_source_fps_kept_without_target(self):
        skeleton, motion, src_fps = parse_bvh(build_walk_bvh(frames=30, fps=60.0))
        g = gesture_from_bvh(skeleton, motion, src_fps)
        assert g.fps == pytest.approx(60.0, rel=1e-6)
        assert g.frames.shape == (30, 15)

    def test_write_bvh_round_trip(self):
        skeleton, motion, src_fps = parse_bvh(build_walk_bvh(frames=120, fps=60.0))
        g = gesture_from_bvh(skeleton, motion, src_fps, target_fps=20.0)
        text = write_bvh(skeleton, g)
        skeleton2, motion2, fps2 = parse_bvh(text)
        assert fps2 == pytest.approx(20.0, rel=1e-6)
        assert motion2.shape == (40, 12)
        # Original starts at origin with identity heading, so integration
        # reproduces the absolute track.
        np.testing.assert_allclose(motion2[:, 0], (3 * np.arange(40)) / 60.0,
                                   atol=1e-4)
        np.testing.assert_allclose(motion2[:, 1:6], 0.0, atol=1e-4)
        spine_deg = 20.0 * np.sin(2 * np.pi * (3 * np.arange(40)) / 120)
        np.testing.assert_allclose(motion2[:, 6], spine_deg, atol=1e-3)

    def test_write_bvh_channel_mismatch(self):
        skeleton, motion, src_fps = parse_bvh(build_walk_bvh(frames=4))
        g = GestureSequence(frames=np.zeros((4, 12)), fps=20.0)
        with pytest.raises(ShapeError):
            write_bvh(skeleton, g)

    def test_nonroot_position_channels_rejected(self):
        text = build_walk_bvh(frames=4).replace(
            "\t\tCHANNELS 3 Zrotation Xrotation Yrotation",
            "\t\tCHANNELS 6 Xposition Yposition Zposition "
            "Zrotation Xrotation Yrotation", 1)
        out = []
        for ln in text.splitlines():
            parts = ln.split()
            if len(parts) == 12 and parts[0] != "CHANNELS":  # a motion data row
                parts = parts[:6] + ["0.0", "0.0", "0.0"] + parts[6:]
                ln = " ".join(parts)
            out.append(ln)
        skeleton, motion, src_fps = parse_bvh("\n".join(out) + "\n")
        with pytest.raises(ValueError, match="position"):
            gesture_from_bvh(skeleton, motion, src_fps)
