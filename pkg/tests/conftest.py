"""Shared corpus builders for the pipeline, service, and CLI tests."""

import numpy as np
from scipy.io import wavfile

from gesturegen.config import Config, parse_config

FPS_SRC = 30.0


def build_bvh(frames: int, fps: float = FPS_SRC, speed: float = 1.0) -> str:
    """Two-joint rig (Hips + Spine) walking along +X with a swaying spine."""
    header = "\n".join([
        "HIERARCHY",
        "ROOT Hips",
        "{",
        "\tOFFSET 0.0 90.0 0.0",
        "\tCHANNELS 6 Xposition Yposition Zposition Zrotation Xrotation Yrotation",
        "\tJOINT Spine",
        "\t{",
        "\t\tOFFSET 0.0 20.0 0.0",
        "\t\tCHANNELS 3 Zrotation Xrotation Yrotation",
        "\t\tEnd Site",
        "\t\t{",
        "\t\t\tOFFSET 0.0 5.0 0.0",
        "\t\t}",
        "\t}",
        "}",
        "MOTION",
        f"Frames: {frames}",
        f"Frame Time: {1.0 / fps:.8f}",
    ])
    rows = []
    for t in range(frames):
        x = speed * t / fps
        spine = 20.0 * np.sin(2 * np.pi * t / 60.0)
        rows.append(" ".join(f"{v:.6f}" for v in
                             [x, 90.0, 0.0, 0.0, 0.0, 0.0, spine, 0.0, 0.0]))
    return header + "\n" + "\n".join(rows) + "\n"


def build_corpus(tmp_path, stems=("alpha", "bravo"), seconds=5.0,
                 wav_rate=16000, extra_bvh=None):
    """Paired BVH/WAV corpus; audio is a 1 Hz click train."""
    bvh_dir = tmp_path / "bvh"
    wav_dir = tmp_path / "wav"
    bvh_dir.mkdir(exist_ok=True)
    wav_dir.mkdir(exist_ok=True)
    for i, stem in enumerate(stems):
        frames = int(round(seconds * FPS_SRC))
        (bvh_dir / f"{stem}.bvh").write_text(build_bvh(frames, speed=1.0 + i))
        wave = np.zeros(int(seconds * wav_rate), dtype=np.float32)
        for k in range(int(seconds)):
            wave[k * wav_rate] = 0.9
        wavfile.write(wav_dir / f"{stem}.wav", wav_rate, wave)
    if extra_bvh:
        (bvh_dir / f"{extra_bvh}.bvh").write_text(build_bvh(60))
    return bvh_dir, wav_dir


def tiny_config(**overrides) -> Config:
    """Smallest config that still exercises every model component."""
    raw = tiny_config_dict(**overrides)
    return parse_config(raw)


def tiny_config_dict(**overrides) -> dict:
    raw = {
        "data": {"clip_s": 2.0},
        "model": {"d_hidden": 16, "num_blocks": 1, "d_state": 4,
                  "head_dim": 8, "chunk_len": 16, "style_d_state": 4,
                  "style_head_dim": 8, "style_chunk_len": 16},
        "diffusion": {"n_steps": 8},
        "train": {"batch_size": 2, "max_steps": 3, "learning_rate": 1e-3},
        "metrics": {"fgd_window": 20, "encoder_steps": 10},
    }
    for section, fields in overrides.items():
        raw.setdefault(section, {}).update(fields)
    return raw
