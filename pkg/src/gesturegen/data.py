"""Corpus preparation and dataset assembly.

prepare_corpus pairs BVH and WAV files by stem, converts motion to the
gesture representation at the target fps, resamples audio to 16 kHz,
segments both into fixed-length clips, and writes DIMG/WAV clip files plus
a manifest CSV, the skeleton, and per-channel standardization stats.
"""

from __future__ import annotations

import csv
import json
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.io import wavfile

from .condition import MelBackend, extract_features
from .errors import BvhParseError, FormatError
from .motion import (
    ChannelStats,
    Skeleton,
    compute_stats,
    gesture_from_bvh,
    load_dimg,
    parse_bvh,
    resample_audio,
    save_dimg,
    segment_clips,
    standardize,
)

MANIFEST_NAME = "manifest.csv"
SKELETON_NAME = "skeleton.json"
STATS_NAME = "stats.json"
MANIFEST_FIELDS = ["clip_id", "gesture_path", "audio_path", "duration_s"]


def worker_count(n_tasks: int) -> int:
    """Parallelism for file-level fan-out, capped by DIM_GESTURE_THREADS."""
    cap = os.environ.get("DIM_GESTURE_THREADS")
    limit = max(1, int(cap)) if cap else (os.cpu_count() or 1)
    return max(1, min(limit, n_tasks))


def read_wav(path) -> tuple[np.ndarray, int]:
    """Load a WAV as mono float32 in [-1, 1] plus its sample rate."""
    rate, data = wavfile.read(path)
    data = np.asarray(data)
    if data.ndim == 2:
        data = data.mean(axis=1)
    if data.dtype == np.int16:
        data = data / 32768.0
    elif data.dtype == np.int32:
        data = data / 2147483648.0
    elif data.dtype == np.uint8:
        data = (data.astype(np.float64) - 128.0) / 128.0
    return data.astype(np.float32), int(rate)


def write_wav(path, wave: np.ndarray, sample_rate: int = 16000) -> None:
    wavfile.write(path, sample_rate, np.asarray(wave, dtype=np.float32))


@dataclass
class ManifestRow:
    clip_id: str
    gesture_path: str
    audio_path: str
    duration_s: float


@dataclass
class PrepareReport:
    out_dir: Path
    rows: list
    skipped: list  # human-readable warnings for unpaired/odd inputs
    skeleton: Skeleton | None
    stats: ChannelStats | None

    @property
    def manifest_path(self) -> Path:
        return self.out_dir / MANIFEST_NAME


def _convert_pair(stem: str, bvh_path: Path, wav_path: Path, fps: int,
                  sample_rate: int, clip_s: float):
    try:
        skeleton, motion, src_fps = parse_bvh(bvh_path.read_text())
    except BvhParseError as exc:
        raise BvhParseError(f"{bvh_path}: {exc}") from exc
    gesture = gesture_from_bvh(skeleton, motion, src_fps, target_fps=fps)
    wave, rate = read_wav(wav_path)
    if rate != sample_rate:
        wave = resample_audio(wave, rate, sample_rate)
    clips = segment_clips(gesture, wave, clip_s=clip_s, sample_rate=sample_rate)
    return stem, skeleton, clips


def prepare_corpus(bvh_dir, wav_dir, out_dir, *, fps: int = 20,
                   sample_rate: int = 16000, clip_s: float = 20.0) -> PrepareReport:
    """Convert a paired BVH/WAV corpus into clip files plus manifest."""
    bvh_dir, wav_dir, out_dir = Path(bvh_dir), Path(wav_dir), Path(out_dir)
    clip_dir = out_dir / "clips"
    clip_dir.mkdir(parents=True, exist_ok=True)
    bvh_files = {p.stem: p for p in sorted(bvh_dir.glob("*.bvh"))}
    wav_files = {p.stem: p for p in sorted(wav_dir.glob("*.wav"))}
    stems = sorted(set(bvh_files) & set(wav_files))
    skipped = [f"{bvh_files[s]}: no paired wav, skipped"
               for s in sorted(set(bvh_files) - set(wav_files))]
    skipped += [f"{wav_files[s]}: no paired bvh, skipped"
                for s in sorted(set(wav_files) - set(bvh_files))]

    results = []
    if stems:
        with ThreadPoolExecutor(max_workers=worker_count(len(stems))) as pool:
            futures = [pool.submit(_convert_pair, s, bvh_files[s], wav_files[s],
                                   fps, sample_rate, clip_s) for s in stems]
            results = [f.result() for f in futures]

    skeleton = None
    rows = []
    all_frames = []
    for stem, pair_skeleton, clips in results:
        if skeleton is None:
            skeleton = pair_skeleton
        elif [j.name for j in skeleton.joints] != [j.name for j in
                                                   pair_skeleton.joints]:
            raise ValueError(f"{stem}: skeleton disagrees with the corpus rig")
        if not clips:
            skipped.append(f"{stem}: shorter than {clip_s} s, no clips")
        for k, clip in enumerate(clips):
            clip_id = f"{stem}_{k:03d}"
            gesture_path = clip_dir / f"{clip_id}.dimg"
            audio_path = clip_dir / f"{clip_id}.wav"
            save_dimg(gesture_path, clip.gesture)
            write_wav(audio_path, clip.audio, clip.sample_rate)
            rows.append(ManifestRow(clip_id=clip_id,
                                    gesture_path=str(gesture_path),
                                    audio_path=str(audio_path),
                                    duration_s=clip.gesture.duration_s))
            all_frames.append(clip.gesture.frames)

    stats = compute_stats(all_frames) if all_frames else None
    with open(out_dir / MANIFEST_NAME, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(MANIFEST_FIELDS)
        for row in rows:
            writer.writerow([row.clip_id, row.gesture_path, row.audio_path,
                             f"{row.duration_s:.6f}"])
    if skeleton is not None:
        (out_dir / SKELETON_NAME).write_text(
            json.dumps(skeleton.to_jsonable(), indent=2) + "\n")
    if stats is not None:
        (out_dir / STATS_NAME).write_text(
            json.dumps(stats.to_jsonable(), indent=2) + "\n")
    for message in skipped:
        warnings.warn(message, stacklevel=2)
    return PrepareReport(out_dir=out_dir, rows=rows, skipped=skipped,
                         skeleton=skeleton, stats=stats)


def load_manifest(data_dir) -> list:
    data_dir = Path(data_dir)
    path = data_dir / MANIFEST_NAME
    if not path.exists():
        raise FileNotFoundError(f"{path}: manifest not found; run prepare first")
    rows = []
    with open(path, newline="") as fh:
        for record in csv.DictReader(fh):
            rows.append(ManifestRow(clip_id=record["clip_id"],
                                    gesture_path=record["gesture_path"],
                                    audio_path=record["audio_path"],
                                    duration_s=float(record["duration_s"])))
    return rows


def load_corpus_meta(data_dir) -> tuple[Skeleton, ChannelStats]:
    data_dir = Path(data_dir)
    skeleton = Skeleton.from_jsonable(
        json.loads((data_dir / SKELETON_NAME).read_text()))
    stats = ChannelStats.from_jsonable(
        json.loads((data_dir / STATS_NAME).read_text()))
    return skeleton, stats


def build_training_set(data_dir, *, sample_rate: int = 16000,
                       feature_dir=None) -> dict:
    """Load all prepared clips as (standardized gesture, feature) pairs.

    Features come from the mel backend, or from <feature_dir>/<clip_id>.dimf
    files when a feature directory (e.g. the exporter's output) is given.
    """
    import torch

    from .condition import load_dimf

    rows = load_manifest(data_dir)
    if not rows:
        raise ValueError(f"{data_dir}: manifest is empty")
    skeleton, stats = load_corpus_meta(data_dir)
    backend = MelBackend()
    pairs = []
    feature_rate = None
    for row in rows:
        gesture = load_dimg(row.gesture_path)
        frames = standardize(gesture.frames.astype(np.float32), stats)
        if feature_dir is not None:
            feat = load_dimf(Path(feature_dir) / f"{row.clip_id}.dimf")
        else:
            wave, rate = read_wav(row.audio_path)
            if rate != sample_rate:
                wave = resample_audio(wave, rate, sample_rate)
            feat = extract_features(wave, sample_rate, backend)
        feature_rate = feat.frame_rate_hz
        pairs.append((torch.from_numpy(np.ascontiguousarray(frames)),
                      torch.from_numpy(feat.z_a.copy())))
    return {"pairs": pairs, "skeleton": skeleton, "stats": stats,
            "feature_rate_hz": feature_rate,
            "gesture_channels": pairs[0][0].shape[1]}
