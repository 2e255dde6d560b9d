"""End-to-end pipelines behind the service endpoints.

Each function is a plain-Python orchestration of the core modules: corpus
preparation, config-driven training, audio-to-BVH sampling, directory
evaluation, and the scaling benchmark.
"""

from __future__ import annotations

import csv
import warnings
from pathlib import Path

import numpy as np
import torch

from .checkpoint import load_checkpoint
from .condition import MelBackend, extract_features, load_dimf
from .config import Config, config_hash, parse_config
from .data import build_training_set, prepare_corpus, read_wav
from .diffusion import NoiseSchedule, TrainResult, build_schedule, sample, train
from .errors import ConfigError, ShapeError
from .metrics import (
    GestureFeatureEncoder,
    audio_beats,
    beat_align,
    clip_windows,
    fgd_feature,
    fgd_raw,
    gesture_beats,
)
from .model import GestureModel
from .motion import (
    ChannelStats,
    GestureSequence,
    Skeleton,
    destandardize,
    load_dimg,
    resample_audio,
    write_bvh,
)

__all__ = [
    "prepare_corpus",
    "train_from_config",
    "sample_to_bvh",
    "evaluate_dirs",
    "load_model_from_checkpoint",
]


def train_from_config(cfg: Config, data_dir, out_dir,
                      resume_from=None) -> TrainResult:
    """Build the model from config, load the prepared corpus, run training.

    The checkpoint carries the config, skeleton, and channel stats so
    sampling needs nothing but the checkpoint and a WAV.
    """
    data = build_training_set(data_dir, sample_rate=cfg.data.sample_rate)
    if data["feature_rate_hz"] is not None and \
            abs(data["feature_rate_hz"] - cfg.model.feature_rate_hz) > 1e-6:
        raise ConfigError(
            f"corpus features at {data['feature_rate_hz']} Hz but config "
            f"declares {cfg.model.feature_rate_hz} Hz")
    channels = data["gesture_channels"]
    model = GestureModel(cfg.extractor_config(), cfg.denoiser_config(channels),
                         seed=cfg.train.seed)
    sched = build_schedule(cfg.diffusion.n_steps, cfg.diffusion.beta_start,
                           cfg.diffusion.beta_end)
    extra = {
        "config": cfg.model_dump(),
        "config_hash": config_hash(cfg),
        "skeleton": data["skeleton"].to_jsonable(),
        "stats": data["stats"].to_jsonable(),
        "gesture_channels": channels,
    }
    return train(model, data["pairs"], sched, cfg.train_config(), out_dir,
                 resume_from=resume_from, extra=extra)


def load_model_from_checkpoint(checkpoint_path):
    """Rebuild (model, schedule, config, skeleton, stats) from a checkpoint."""
    payload = load_checkpoint(checkpoint_path)
    extra = payload["extra"]
    cfg = parse_config(extra["config"], source=f"{checkpoint_path}: config")
    model = GestureModel(cfg.extractor_config(),
                         cfg.denoiser_config(extra["gesture_channels"]),
                         seed=cfg.train.seed)
    model.load_state_dict(payload["model"])
    model.eval()
    sched = NoiseSchedule.from_beta(payload["schedule_beta"])
    skeleton = Skeleton.from_jsonable(extra["skeleton"])
    stats = ChannelStats.from_jsonable(extra["stats"])
    return model, sched, cfg, skeleton, stats


def sample_to_bvh(checkpoint_path, wav_path, out_path, seed: int = 0,
                  features_path=None, langevin_noise: bool = True) -> dict:
    """Full-sequence gesture synthesis: WAV (or exported features) to BVH."""
    model, sched, cfg, skeleton, stats = load_model_from_checkpoint(
        checkpoint_path)
    resampled = False
    if features_path is not None:
        feat = load_dimf(features_path)
    else:
        wave, rate = read_wav(wav_path)
        if rate != cfg.data.sample_rate:
            wave = resample_audio(wave, rate, cfg.data.sample_rate)
            resampled = True
        feat = extract_features(wave, cfg.data.sample_rate, MelBackend())
    if feat.z_a.shape[1] != cfg.model.d_feature:
        raise ShapeError(
            f"features have {feat.z_a.shape[1]} channels, model expects "
            f"{cfg.model.d_feature}")
    z_a = torch.from_numpy(feat.z_a.copy())
    frames = sample(model, z_a, sched, seed=seed,
                    feature_rate_hz=feat.frame_rate_hz,
                    langevin_noise=langevin_noise)
    restored = destandardize(frames.numpy().astype(np.float32), stats)
    gesture = GestureSequence(frames=restored, fps=float(cfg.data.fps))
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    out_path.write_text(write_bvh(skeleton, gesture))
    return {"frames": int(restored.shape[0]), "fps": cfg.data.fps,
            "out_path": str(out_path), "resampled": resampled,
            "checkpoint_step": load_checkpoint(checkpoint_path)["step"],
            "seed": seed}


def _load_dimg_dir(dir_path) -> dict:
    files = sorted(Path(dir_path).glob("*.dimg"))
    if not files:
        raise ValueError(f"{dir_path}: no .dimg files found")
    return {p.stem: load_dimg(p) for p in files}


def evaluate_dirs(real_dir, gen_dir, wav_dir=None, out_csv=None,
                  cfg: Config | None = None) -> dict:
    """FGD (raw + feature space) between directories of DIMG clips, plus
    BeatAlign of generated clips against stem-matched WAVs."""
    cfg = cfg or Config()
    real = _load_dimg_dir(real_dir)
    gen = _load_dimg_dir(gen_dir)
    window = cfg.metrics.fgd_window
    real_clips = [real[k] for k in sorted(real)]
    gen_clips = [gen[k] for k in sorted(gen)]
    raw = fgd_raw(real_clips, gen_clips, window=window)
    encoder = GestureFeatureEncoder(
        channels=real_clips[0].channels, window=window,
        d_embed=cfg.metrics.encoder_dim, seed=cfg.metrics.encoder_seed)
    encoder.fit(clip_windows(real_clips, window),
                steps=cfg.metrics.encoder_steps, seed=cfg.metrics.encoder_seed)
    feature = fgd_feature(real_clips, gen_clips, encoder, window=window)

    align = None
    if wav_dir is not None:
        scores = []
        for stem in sorted(gen):
            wav_path = Path(wav_dir) / f"{stem}.wav"
            if not wav_path.exists():
                warnings.warn(f"{wav_path}: missing, skipped for BeatAlign",
                              stacklevel=2)
                continue
            wave, rate = read_wav(wav_path)
            if rate != cfg.data.sample_rate:
                wave = resample_audio(wave, rate, cfg.data.sample_rate)
            scores.append(beat_align(gesture_beats(gen[stem]),
                                     audio_beats(wave, cfg.data.sample_rate),
                                     sigma_s=cfg.metrics.beat_sigma_s))
        align = float(np.mean(scores)) if scores else None

    result = {"fgd_raw": float(raw), "fgd_feature": float(feature),
              "beat_align": align, "n_real": len(real_clips),
              "n_gen": len(gen_clips), "config_hash": config_hash(cfg)}
    if out_csv is not None:
        out_csv = Path(out_csv)
        out_csv.parent.mkdir(parents=True, exist_ok=True)
        with open(out_csv, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["metric", "value", "n_real", "n_gen",
                             "config_hash"])
            for name in ("fgd_raw", "fgd_feature", "beat_align"):
                if result[name] is None:
                    continue
                writer.writerow([name, f"{result[name]:.8f}",
                                 result["n_real"], result["n_gen"],
                                 result["config_hash"]])
        result["report_path"] = str(out_csv)
    return result
