"""Motion ingestion and representation.

BVH parsing/writing, exponential-map rotations, heading-removed root
velocity channels, fps and audio resampling, clip segmentation, per-channel
standardization, and the DIMG gesture interchange format.

Gesture channel layout is [expmap joints (3 per joint, skeleton order) ||
root positional velocity (3) || root rotational velocity (3)], with the
root's expmap slot holding its heading-removed orientation. Velocities are
per-frame displacements in the root's local yaw frame, so integrating them
from a known start reproduces the world track.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import signal
from scipy.spatial.transform import Rotation

from .errors import BvhParseError, FormatError, ShapeError

__all__ = [
    "Joint",
    "Skeleton",
    "GestureSequence",
    "ClipPair",
    "ChannelStats",
    "parse_bvh",
    "format_bvh",
    "write_bvh",
    "gesture_from_bvh",
    "to_expmap",
    "from_expmap",
    "fix_antipodal",
    "root_velocities",
    "integrate_root",
    "resample_fps",
    "resample_audio",
    "segment_clips",
    "compute_stats",
    "standardize",
    "destandardize",
    "save_dimg",
    "load_dimg",
]

_CHANNEL_NAMES = {"Xposition", "Yposition", "Zposition",
                  "Xrotation", "Yrotation", "Zrotation"}


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


@dataclass
class Joint:
    name: str
    parent: int  # -1 for the root
    offset: np.ndarray
    channels: list


@dataclass
class Skeleton:
    """Joint hierarchy in topological (BVH pre-order) order."""

    joints: list
    end_sites: list  # (parent index, offset) pairs

    def __post_init__(self) -> None:
        if not self.joints:
            raise ValueError("skeleton must contain at least one joint")
        roots = [i for i, j in enumerate(self.joints) if j.parent == -1]
        if roots != [0]:
            raise ValueError("skeleton must have a single root at index 0")
        for i, j in enumerate(self.joints[1:], start=1):
            if not 0 <= j.parent < i:
                raise ValueError(f"joint {j.name} breaks topological order")

    @property
    def rotation_channels(self) -> int:
        return 3 * len(self.joints)

    @property
    def raw_channels(self) -> int:
        return sum(len(j.channels) for j in self.joints)

    def channel_start(self, index: int) -> int:
        return sum(len(j.channels) for j in self.joints[:index])

    def to_jsonable(self) -> dict:
        return {
            "joints": [{"name": j.name, "parent": j.parent,
                        "offset": [float(v) for v in j.offset],
                        "channels": list(j.channels)} for j in self.joints],
            "end_sites": [{"parent": int(p), "offset": [float(v) for v in off]}
                          for p, off in self.end_sites],
        }

    @classmethod
    def from_jsonable(cls, payload: dict) -> "Skeleton":
        joints = [Joint(name=j["name"], parent=int(j["parent"]),
                        offset=np.asarray(j["offset"], dtype=np.float64),
                        channels=list(j["channels"]))
                  for j in payload["joints"]]
        sites = [(int(e["parent"]), np.asarray(e["offset"], dtype=np.float64))
                 for e in payload.get("end_sites", [])]
        return cls(joints=joints, end_sites=sites)


@dataclass
class GestureSequence:
    frames: np.ndarray  # (T, D+6)
    fps: float

    def __post_init__(self) -> None:
        self.frames = np.asarray(self.frames)
        if self.frames.ndim != 2:
            raise ShapeError("gesture frames must be 2-D (T, channels)")
        if self.fps <= 0:
            raise ValueError("fps must be positive")

    @property
    def channels(self) -> int:
        return self.frames.shape[1]

    @property
    def duration_s(self) -> float:
        return self.frames.shape[0] / self.fps


@dataclass
class ClipPair:
    gesture: GestureSequence
    audio: np.ndarray
    sample_rate: int = 16000

    def __post_init__(self) -> None:
        self.audio = np.asarray(self.audio)
        if self.audio.ndim != 1:
            raise ShapeError("clip audio must be mono 1-D samples")
        g_s = self.gesture.duration_s
        a_s = self.audio.shape[0] / self.sample_rate
        if abs(g_s - a_s) > 1.0 / self.gesture.fps + 1e-9:
            raise ValueError(
                f"clip durations diverge: gesture {g_s:.3f} s vs audio {a_s:.3f} s")


# ---------------------------------------------------------------------------
# BVH text


def parse_bvh(text: str):
    """Parse BVH 1.0 text into (Skeleton, motion (T, raw_channels), src_fps)."""
    lines = [(i, ln.strip()) for i, ln in enumerate(text.splitlines(), start=1)
             if ln.strip()]
    pos = 0

    def fail(lineno: int, msg: str):
        raise BvhParseError(f"line {lineno}: {msg}")

    def take():
        nonlocal pos
        if pos >= len(lines):
            last = lines[-1][0] if lines else 0
            fail(last, "unexpected end of file")
        lineno, ln = lines[pos]
        pos += 1
        return lineno, ln.split()

    def expect(token: str):
        lineno, toks = take()
        if toks[0] != token:
            fail(lineno, f"expected {token!r}, found {toks[0]!r}")
        return lineno, toks

    joints: list = []
    end_sites: list = []

    def parse_offset() -> np.ndarray:
        lineno, toks = expect("OFFSET")
        if len(toks) != 4:
            fail(lineno, "OFFSET needs exactly 3 values")
        try:
            return np.array([float(v) for v in toks[1:]], dtype=np.float64)
        except ValueError:
            fail(lineno, "OFFSET values must be numbers")

    def parse_joint(name: str, parent: int) -> None:
        index = len(joints)
        expect("{")
        offset = parse_offset()
        lineno, toks = expect("CHANNELS")
        try:
            count = int(toks[1])
        except (IndexError, ValueError):
            fail(lineno, "CHANNELS needs a count")
        names = toks[2:]
        if len(names) != count:
            fail(lineno, f"CHANNELS declares {count} but lists {len(names)}")
        bad = [n for n in names if n not in _CHANNEL_NAMES]
        if bad:
            fail(lineno, f"unknown channel name {bad[0]!r}")
        joints.append(Joint(name=name, parent=parent, offset=offset,
                            channels=list(names)))
        while True:
            lineno, toks = take()
            if toks[0] == "JOINT":
                parse_joint(" ".join(toks[1:]), index)
            elif toks[0] == "End":
                expect("{")
                end_sites.append((index, parse_offset()))
                expect("}")
            elif toks[0] == "}":
                return
            else:
                fail(lineno, f"unexpected token {toks[0]!r} in joint block")

    expect("HIERARCHY")
    lineno, toks = take()
    if toks[0] != "ROOT":
        fail(lineno, f"expected ROOT, found {toks[0]!r}")
    parse_joint(" ".join(toks[1:]), -1)
    expect("MOTION")

    lineno, toks = take()
    if toks[0] != "Frames:" or len(toks) != 2:
        fail(lineno, "expected 'Frames: <count>'")
    try:
        n_frames = int(toks[1])
    except ValueError:
        fail(lineno, "frame count must be an integer")
    lineno, toks = take()
    if toks[:2] != ["Frame", "Time:"] or len(toks) != 3:
        fail(lineno, "expected 'Frame Time: <seconds>'")
    try:
        frame_time = float(toks[2])
    except ValueError:
        fail(lineno, "frame time must be a number")
    if frame_time <= 0:
        fail(lineno, "frame time must be positive")

    rows = lines[pos:]
    if len(rows) != n_frames:
        where = rows[min(n_frames, len(rows) - 1)][0] if rows else lineno
        fail(where, f"header declares {n_frames} frames, found {len(rows)} rows")
    skeleton = Skeleton(joints=joints, end_sites=end_sites)
    width = skeleton.raw_channels
    motion = np.empty((n_frames, width), dtype=np.float64)
    for r, (row_line, ln) in enumerate(rows):
        vals = ln.split()
        if len(vals) != width:
            fail(row_line, f"row has {len(vals)} values, hierarchy implies {width}")
        try:
            motion[r] = [float(v) for v in vals]
        except ValueError:
            fail(row_line, "motion values must be numbers")
    return skeleton, motion, 1.0 / frame_time


def format_bvh(skeleton: Skeleton, motion: np.ndarray, fps: float) -> str:
    """Emit BVH text preserving hierarchy, channel order, and offsets."""
    motion = np.asarray(motion, dtype=np.float64)
    if motion.ndim != 2 or motion.shape[1] != skeleton.raw_channels:
        raise ShapeError(
            f"motion width {motion.shape[-1]} != skeleton channels "
            f"{skeleton.raw_channels}")
    children: dict = {i: [] for i in range(len(skeleton.joints))}
    for i, j in enumerate(skeleton.joints):
        if j.parent >= 0:
            children[j.parent].append(i)
    sites: dict = {i: [] for i in range(len(skeleton.joints))}
    for parent, offset in skeleton.end_sites:
        sites[parent].append(offset)

    def fmt3(v) -> str:
        return " ".join(f"{x:.6f}" for x in v)

    out = ["HIERARCHY"]

    def emit(i: int, depth: int) -> None:
        j = skeleton.joints[i]
        ind = "\t" * depth
        out.append(f"{ind}{'ROOT' if j.parent == -1 else 'JOINT'} {j.name}")
        out.append(ind + "{")
        inner = "\t" * (depth + 1)
        out.append(f"{inner}OFFSET {fmt3(j.offset)}")
        out.append(f"{inner}CHANNELS {len(j.channels)} " + " ".join(j.channels))
        for c in children[i]:
            emit(c, depth + 1)
        for offset in sites[i]:
            out.append(f"{inner}End Site")
            out.append(inner + "{")
            out.append(f"{inner}\tOFFSET {fmt3(offset)}")
            out.append(inner + "}")
        out.append(ind + "}")

    emit(0, 0)
    out += ["MOTION", f"Frames: {motion.shape[0]}",
            f"Frame Time: {1.0 / fps:.8f}"]
    out += [" ".join(f"{v:.6f}" for v in row) for row in motion]
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# Exponential-map rotations


def _skew(v: np.ndarray) -> np.ndarray:
    k = np.zeros((v.shape[0], 3, 3))
    k[:, 0, 1] = -v[:, 2]
    k[:, 0, 2] = v[:, 1]
    k[:, 1, 0] = v[:, 2]
    k[:, 1, 2] = -v[:, 0]
    k[:, 2, 0] = -v[:, 1]
    k[:, 2, 1] = v[:, 0]
    return k


def from_expmap(e: np.ndarray) -> np.ndarray:
    """Rodrigues: axis-angle vectors (..., 3) to rotation matrices (..., 3, 3).

    Below theta = 1e-7 the sin/cos ratios switch to their series expansions.
    """
    e = np.asarray(e, dtype=np.float64)
    lead = e.shape[:-1]
    v = e.reshape(-1, 3)
    theta = np.linalg.norm(v, axis=1)
    small = theta < 1e-7
    safe = np.where(small, 1.0, theta)
    a = np.where(small, 1.0 - theta ** 2 / 6.0, np.sin(theta) / safe)
    b = np.where(small, 0.5 - theta ** 2 / 24.0, (1.0 - np.cos(theta)) / safe ** 2)
    k = _skew(v)
    rot = np.eye(3) + a[:, None, None] * k + b[:, None, None] * (k @ k)
    return rot.reshape(*lead, 3, 3)


def _quat_to_expmap(q: np.ndarray) -> np.ndarray:
    # q in scipy (x, y, z, w) order; sign-flip to w >= 0 puts theta in [0, pi]
    q = np.array(q, dtype=np.float64)
    q[q[:, 3] < 0] *= -1.0
    vec = q[:, :3]
    sin_half = np.linalg.norm(vec, axis=1)
    theta = 2.0 * np.arctan2(sin_half, q[:, 3])
    small = theta < 1e-7
    safe = np.where(small, 1.0, sin_half)
    scale = np.where(small, 2.0 + theta ** 2 / 12.0, theta / safe)
    return scale[:, None] * vec


def _matrix_to_expmap(rot: np.ndarray) -> np.ndarray:
    rot = np.asarray(rot, dtype=np.float64)
    lead = rot.shape[:-2]
    q = Rotation.from_matrix(rot.reshape(-1, 3, 3)).as_quat()
    return _quat_to_expmap(q).reshape(*lead, 3)


def to_expmap(euler_deg: np.ndarray, order: str) -> np.ndarray:
    """Euler degrees (..., 3) in the given intrinsic order to expmap (..., 3),
    canonical theta in [0, pi]."""
    e = np.asarray(euler_deg, dtype=np.float64)
    lead = e.shape[:-1]
    q = Rotation.from_euler(order, e.reshape(-1, 3), degrees=True).as_quat()
    return _quat_to_expmap(np.atleast_2d(q)).reshape(*lead, 3)


def _expmap_to_euler(e: np.ndarray, order: str) -> np.ndarray:
    return Rotation.from_matrix(from_expmap(e)).as_euler(order, degrees=True)


def fix_antipodal(seq: np.ndarray) -> np.ndarray:
    """Swap in the 2*pi-complement representative wherever it sits closer to
    the previous frame, removing artificial jumps when theta crosses pi."""
    out = np.array(seq, dtype=np.float64)
    for t in range(1, out.shape[0]):
        cur = out[t]
        theta = np.linalg.norm(cur)
        if theta < 1e-12:
            continue
        alt = cur * ((theta - 2.0 * math.pi) / theta)
        if np.linalg.norm(alt - out[t - 1]) < np.linalg.norm(cur - out[t - 1]):
            out[t] = alt
    return out


# ---------------------------------------------------------------------------
# Root trajectory


def _heading_angle(rot: np.ndarray) -> np.ndarray:
    """Yaw of the rotated forward (+Z) axis about +Y; falls back to the
    right (+X) axis when forward is vertical."""
    fwd = rot[..., :, 2]
    x, z = fwd[..., 0], fwd[..., 2]
    right = rot[..., :, 0]
    alt = np.arctan2(-right[..., 2], right[..., 0])
    return np.where(x * x + z * z < 1e-12, alt, np.arctan2(x, z))


def _heading_matrix(phi: np.ndarray) -> np.ndarray:
    phi = np.asarray(phi, dtype=np.float64)
    c, s = np.cos(phi), np.sin(phi)
    rot = np.zeros((*phi.shape, 3, 3))
    rot[..., 0, 0] = c
    rot[..., 0, 2] = s
    rot[..., 1, 1] = 1.0
    rot[..., 2, 0] = -s
    rot[..., 2, 2] = c
    return rot


def root_velocities(positions: np.ndarray, orientations: np.ndarray,
                    fps: float) -> np.ndarray:
    """Per-frame root velocities (T, 6) in the heading-removed local frame.

    Columns 0:3 are H_t^T (p_t - p_{t-1}); columns 3:6 the expmap of the
    heading increment H_{t-1}^T H_t. The first frame copies the second.
    """
    positions = np.asarray(positions, dtype=np.float64)
    orientations = np.asarray(orientations, dtype=np.float64)
    if positions.ndim != 2 or positions.shape[1] != 3:
        raise ShapeError("positions must be (T, 3)")
    if orientations.shape != (positions.shape[0], 3, 3):
        raise ShapeError("orientations must be (T, 3, 3)")
    if positions.shape[0] < 2:
        raise ValueError("root velocities need at least 2 frames")
    heading = _heading_matrix(_heading_angle(orientations))
    delta = positions[1:] - positions[:-1]
    pos_vel = np.einsum("tji,tj->ti", heading[1:], delta)
    rot_vel = _matrix_to_expmap(np.einsum("tji,tjk->tik", heading[:-1], heading[1:]))
    vel = np.concatenate([pos_vel, rot_vel], axis=1)
    return np.concatenate([vel[:1], vel], axis=0)


def integrate_root(velocities: np.ndarray, initial_position=(0.0, 0.0, 0.0),
                   initial_heading: float = 0.0):
    """Inverse of root_velocities given the start pose: returns world
    positions (T, 3) and unwrapped heading angles (T,)."""
    velocities = np.asarray(velocities, dtype=np.float64)
    if velocities.ndim != 2 or velocities.shape[1] != 6:
        raise ShapeError("velocities must be (T, 6)")
    n = velocities.shape[0]
    positions = np.zeros((n, 3))
    phi = np.zeros(n)
    positions[0] = np.asarray(initial_position, dtype=np.float64)
    phi[0] = initial_heading
    for t in range(1, n):
        phi[t] = phi[t - 1] + velocities[t, 4]
        positions[t] = positions[t - 1] + _heading_matrix(phi[t]) @ velocities[t, :3]
    return positions, phi


# ---------------------------------------------------------------------------
# Gesture <-> BVH conversion


def _joint_rotation_layout(skeleton: Skeleton, index: int):
    """(column indices, intrinsic order string) of a joint's 3 rotation
    channels; validates the 3-rotations-per-joint assumption."""
    joint = skeleton.joints[index]
    start = skeleton.channel_start(index)
    pos_cols = {}
    rot_cols = []
    order = ""
    for k, name in enumerate(joint.channels):
        if name.endswith("position"):
            if index != 0:
                raise ValueError(
                    f"joint {joint.name}: non-root position channels are "
                    "not supported")
            pos_cols["XYZ".index(name[0])] = start + k
        else:
            rot_cols.append(start + k)
            order += name[0]
    if len(rot_cols) != 3:
        raise ValueError(f"joint {joint.name} must have exactly 3 rotation channels")
    return pos_cols, rot_cols, order


def _resample_grid(n_src: int, src_fps: float, dst_fps: float):
    n_out = int(math.floor((n_src - 1) * dst_fps / src_fps)) + 1
    pos = np.arange(n_out) * (src_fps / dst_fps)
    i0 = np.minimum(np.floor(pos).astype(int), n_src - 1)
    w = pos - i0
    i1 = np.minimum(i0 + 1, n_src - 1)
    return i0, i1, w


def _interp_rotations(rot: np.ndarray, i0, i1, w) -> np.ndarray:
    """Shortest-path rotation interpolation at fractional frame positions."""
    r0, r1 = rot[i0], rot[i1]
    rel = _matrix_to_expmap(np.einsum("tji,tjk->tik", r0, r1))
    return r0 @ from_expmap(w[:, None] * rel)


def gesture_from_bvh(skeleton: Skeleton, motion: np.ndarray, src_fps: float,
                     target_fps: float | None = None) -> GestureSequence:
    """Raw BVH motion to the gesture representation, optionally resampling
    rotations/positions to target_fps before velocities are differenced (so
    per-frame velocities always match the output rate)."""
    motion = np.asarray(motion, dtype=np.float64)
    if motion.ndim != 2 or motion.shape[1] != skeleton.raw_channels:
        raise ShapeError(
            f"motion width {motion.shape[-1]} != skeleton channels "
            f"{skeleton.raw_channels}")
    if motion.shape[0] < 2:
        raise ValueError("need at least 2 frames to derive velocities")

    rotations = []
    positions = np.zeros((motion.shape[0], 3))
    for index in range(len(skeleton.joints)):
        pos_cols, rot_cols, order = _joint_rotation_layout(skeleton, index)
        euler = motion[:, rot_cols]
        rotations.append(Rotation.from_euler(order, euler, degrees=True).as_matrix())
        if index == 0:
            for axis, col in pos_cols.items():
                positions[:, axis] = motion[:, col]

    fps = src_fps
    if target_fps is not None and abs(target_fps - src_fps) > 1e-9:
        if target_fps > src_fps:
            raise ValueError(f"cannot upsample {src_fps} fps to {target_fps} fps")
        i0, i1, w = _resample_grid(motion.shape[0], src_fps, target_fps)
        rotations = [_interp_rotations(rot, i0, i1, w) for rot in rotations]
        positions = np.stack(
            [np.interp(i0 + w, np.arange(positions.shape[0]), positions[:, k])
             for k in range(3)], axis=1)
        fps = target_fps

    root = rotations[0]
    heading = _heading_matrix(_heading_angle(root))
    root_local = np.einsum("tji,tjk->tik", heading, root)
    blocks = [fix_antipodal(_matrix_to_expmap(root_local))]
    blocks += [fix_antipodal(_matrix_to_expmap(rot)) for rot in rotations[1:]]
    blocks.append(root_velocities(positions, root, fps))
    frames = np.concatenate(blocks, axis=1).astype(np.float32)
    return GestureSequence(frames=frames, fps=float(fps))


def write_bvh(skeleton: Skeleton, gesture: GestureSequence,
              initial_position=(0.0, 0.0, 0.0),
              initial_heading: float = 0.0) -> str:
    """Gesture back to BVH text: expmap to euler per the skeleton's channel
    order, root velocities integrated from the given start pose."""
    frames = np.asarray(gesture.frames, dtype=np.float64)
    d_rot = skeleton.rotation_channels
    if frames.shape[1] != d_rot + 6:
        raise ShapeError(
            f"gesture has {frames.shape[1]} channels, skeleton implies {d_rot + 6}")
    positions, phi = integrate_root(frames[:, d_rot:], initial_position,
                                    initial_heading)
    root = _heading_matrix(phi) @ from_expmap(frames[:, 0:3])
    motion = np.zeros((frames.shape[0], skeleton.raw_channels))
    for index in range(len(skeleton.joints)):
        pos_cols, rot_cols, order = _joint_rotation_layout(skeleton, index)
        if index == 0:
            rot = Rotation.from_matrix(root)
            for axis, col in pos_cols.items():
                motion[:, col] = positions[:, axis]
        else:
            rot = Rotation.from_matrix(from_expmap(frames[:, 3 * index:3 * index + 3]))
        motion[:, rot_cols] = rot.as_euler(order, degrees=True)
    return format_bvh(skeleton, motion, gesture.fps)


# ---------------------------------------------------------------------------
# Resampling and segmentation


def resample_fps(gesture: GestureSequence, dst_fps: float = 20.0) -> GestureSequence:
    """Downsample: expmap channels via shortest-path rotation interpolation,
    velocity channels linearly. Exact source positions copy through bit-exactly."""
    src_fps = gesture.fps
    if dst_fps > src_fps + 1e-9:
        raise ValueError(f"cannot upsample {src_fps} fps to {dst_fps} fps")
    frames = np.asarray(gesture.frames, dtype=np.float64)
    n, width = frames.shape
    if width < 6 or (width - 6) % 3:
        raise ShapeError(f"channel count {width} does not fit the D+6 layout")
    i0, i1, w = _resample_grid(n, src_fps, dst_fps)
    out = np.empty((i0.shape[0], width))
    out[:, -6:] = frames[i0, -6:] * (1 - w)[:, None] + frames[i1, -6:] * w[:, None]
    for j in range((width - 6) // 3):
        block = slice(3 * j, 3 * j + 3)
        rot = _interp_rotations(from_expmap(frames[:, block]), i0, i1, w)
        out[:, block] = _matrix_to_expmap(rot)
    exact = w <= 1e-12
    out[exact] = frames[i0[exact]]
    return GestureSequence(frames=out, fps=float(dst_fps))


def resample_audio(wave: np.ndarray, src_hz: int = 44100,
                   dst_hz: int = 16000) -> np.ndarray:
    """Windowed-sinc resampling; output length = round(len * dst / src)."""
    wave = np.asarray(wave)
    if wave.ndim != 1:
        raise ShapeError("audio must be mono 1-D samples")
    if wave.size == 0:
        raise ValueError("cannot resample empty audio")
    g = math.gcd(int(src_hz), int(dst_hz))
    out = signal.resample_poly(wave.astype(np.float64), int(dst_hz) // g,
                               int(src_hz) // g, window=("kaiser", 14.0),
                               padtype="edge")
    target = _round_half_up(wave.size * dst_hz / src_hz)
    if out.size > target:
        out = out[:target]
    elif out.size < target:
        out = np.pad(out, (0, target - out.size), mode="edge")
    return out.astype(np.float32)


def segment_clips(gesture: GestureSequence, audio: np.ndarray,
                  clip_s: float = 20.0, sample_rate: int = 16000) -> list:
    """Non-overlapping clip pairs; the trailing remainder is dropped."""
    audio = np.asarray(audio)
    frames_per = int(round(clip_s * gesture.fps))
    samples_per = int(round(clip_s * sample_rate))
    if frames_per < 1 or samples_per < 1:
        raise ValueError(f"clip length {clip_s} s is too short")
    count = min(gesture.frames.shape[0] // frames_per, audio.shape[0] // samples_per)
    clips = []
    for k in range(count):
        clip_frames = gesture.frames[k * frames_per:(k + 1) * frames_per].copy()
        clip_audio = audio[k * samples_per:(k + 1) * samples_per].copy()
        clips.append(ClipPair(gesture=GestureSequence(clip_frames, gesture.fps),
                              audio=clip_audio, sample_rate=sample_rate))
    return clips


# ---------------------------------------------------------------------------
# Standardization


@dataclass
class ChannelStats:
    mean: np.ndarray
    std: np.ndarray

    def to_jsonable(self) -> dict:
        return {"mean": [float(v) for v in self.mean],
                "std": [float(v) for v in self.std]}

    @classmethod
    def from_jsonable(cls, payload: dict) -> "ChannelStats":
        return cls(mean=np.asarray(payload["mean"], dtype=np.float64),
                   std=np.asarray(payload["std"], dtype=np.float64))


def compute_stats(frames_list, floor: float = 1e-6) -> ChannelStats:
    """Per-channel mean/std over all frames of all arrays; std floored."""
    if not frames_list:
        raise ValueError("cannot compute stats over an empty corpus")
    cat = np.concatenate([np.asarray(f, dtype=np.float64) for f in frames_list],
                         axis=0)
    return ChannelStats(mean=cat.mean(axis=0),
                        std=np.maximum(cat.std(axis=0), floor))


def standardize(frames: np.ndarray, stats: ChannelStats) -> np.ndarray:
    frames = np.asarray(frames)
    out = (frames.astype(np.float64) - stats.mean) / stats.std
    return out.astype(frames.dtype)


def destandardize(frames: np.ndarray, stats: ChannelStats) -> np.ndarray:
    frames = np.asarray(frames)
    out = frames.astype(np.float64) * stats.std + stats.mean
    return out.astype(frames.dtype)


# ---------------------------------------------------------------------------
# DIMG interchange format

_DIMG_MAGIC = b"DIMG"
_DIMG_VERSION = 1
_DIMG_HEADER = struct.Struct("<4sIIIf")  # magic, version, T, C, fps


def save_dimg(path, gesture: GestureSequence) -> None:
    frames = np.ascontiguousarray(gesture.frames, dtype="<f4")
    header = _DIMG_HEADER.pack(_DIMG_MAGIC, _DIMG_VERSION, frames.shape[0],
                               frames.shape[1], gesture.fps)
    Path(path).write_bytes(header + frames.tobytes())


def load_dimg(path) -> GestureSequence:
    raw = Path(path).read_bytes()
    if len(raw) < _DIMG_HEADER.size:
        raise FormatError(f"{path}: truncated header ({len(raw)} bytes)")
    magic, version, n_frames, n_channels, fps = _DIMG_HEADER.unpack(
        raw[:_DIMG_HEADER.size])
    if magic != _DIMG_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    if version != _DIMG_VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    payload = raw[_DIMG_HEADER.size:]
    expect = 4 * n_frames * n_channels
    if len(payload) != expect:
        raise FormatError(
            f"{path}: payload is {len(payload)} bytes, header implies {expect}")
    frames = np.frombuffer(payload, dtype="<f4").reshape(n_frames, n_channels).copy()
    return GestureSequence(frames=frames, fps=fps)
