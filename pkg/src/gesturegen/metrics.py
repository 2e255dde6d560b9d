"""Objective evaluation metrics.

Frechet gesture distance on raw windows and on learned feature embeddings,
plus the BeatAlign score between audio onsets and gesture-motion beats.
All reductions are deterministic; the only trained element is the small
window autoencoder behind the feature-space distance.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from . import rng as rngmod
from .errors import ShapeError
from .ssm import _fill_uniform

__all__ = [
    "GaussianStats",
    "BeatList",
    "GestureFeatureEncoder",
    "gaussian_stats",
    "frechet_distance",
    "fgd_raw",
    "fgd_feature",
    "audio_beats",
    "gesture_beats",
    "beat_align",
    "clip_windows",
]


@dataclass
class GaussianStats:
    mu: np.ndarray
    sigma: np.ndarray


@dataclass
class BeatList:
    times: np.ndarray  # seconds, strictly increasing, non-negative

    def __post_init__(self) -> None:
        self.times = np.asarray(self.times, dtype=np.float64).ravel()
        if self.times.size and self.times[0] < 0:
            raise ValueError("beat times must be non-negative")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("beat times must be strictly increasing")


def gaussian_stats(samples: np.ndarray) -> GaussianStats:
    """Sample mean and covariance (denominator n-1) of row vectors."""
    x = np.asarray(samples, dtype=np.float64)
    if x.ndim != 2:
        raise ShapeError("samples must be (n, d)")
    n = x.shape[0]
    if n < 2:
        raise ValueError(f"need at least 2 samples to fit a Gaussian, got {n}")
    mu = x.mean(axis=0)
    centered = x - mu
    return GaussianStats(mu=mu, sigma=centered.T @ centered / (n - 1))


def _psd_sqrt(sym: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh(sym)
    return (vecs * np.sqrt(np.clip(vals, 0.0, None))) @ vecs.T


def frechet_distance(s1: GaussianStats, s2: GaussianStats) -> float:
    """||mu1-mu2||^2 + Tr(S1 + S2 - 2 (S1 S2)^{1/2}).

    The cross term uses the eigendecomposition of the symmetrized product
    S2^{1/2} S1 S2^{1/2}; tiny negative eigenvalues clamp to zero so the
    result stays non-negative for all PSD inputs.
    """
    mu1 = np.asarray(s1.mu, dtype=np.float64)
    mu2 = np.asarray(s2.mu, dtype=np.float64)
    sig1 = np.asarray(s1.sigma, dtype=np.float64)
    sig2 = np.asarray(s2.sigma, dtype=np.float64)
    if mu1.shape != mu2.shape or sig1.shape != sig2.shape:
        raise ShapeError(
            f"dimension mismatch: d={mu1.shape[0]} vs d={mu2.shape[0]}")
    root2 = _psd_sqrt((sig2 + sig2.T) / 2)
    inner = root2 @ sig1 @ root2
    vals = np.clip(np.linalg.eigvalsh((inner + inner.T) / 2), 0.0, None)
    fd = (np.sum((mu1 - mu2) ** 2) + np.trace(sig1) + np.trace(sig2)
          - 2.0 * np.sum(np.sqrt(vals)))
    return max(float(fd), 0.0)


def clip_windows(clips, window: int) -> np.ndarray:
    """Non-overlapping (window, C) slices over all clips, stacked (n, window, C)."""
    if window < 1:
        raise ValueError("window must be at least 1 frame")
    rows = []
    for clip in clips:
        frames = np.asarray(getattr(clip, "frames", clip), dtype=np.float64)
        if frames.ndim != 2:
            raise ShapeError("clips must be 2-D (T, channels)")
        for k in range(frames.shape[0] // window):
            rows.append(frames[k * window:(k + 1) * window])
    if len(rows) < 2:
        raise ValueError(
            f"need at least 2 windows of {window} frames, got {len(rows)}")
    return np.stack(rows)


def fgd_raw(real, gen, window: int = 40) -> float:
    """Frechet distance between flattened window populations."""
    w_real = clip_windows(real, window)
    w_gen = clip_windows(gen, window)
    if w_real.shape[2] != w_gen.shape[2]:
        raise ShapeError("real and generated clips disagree on channel count")
    return frechet_distance(
        gaussian_stats(w_real.reshape(w_real.shape[0], -1)),
        gaussian_stats(w_gen.reshape(w_gen.shape[0], -1)))


def fgd_feature(real, gen, encoder, window: int = 40) -> float:
    """Frechet distance between encoded window embeddings.

    The encoder is any callable mapping (n, window, C) windows to (n, d)
    embeddings; a GestureFeatureEncoder must be fitted first.
    """
    if getattr(encoder, "trained", True) is False:
        raise ValueError(
            "feature encoder is untrained; fit it on real windows first")
    w_real = clip_windows(real, window)
    w_gen = clip_windows(gen, window)
    e_real = np.asarray(encoder(w_real), dtype=np.float64)
    e_gen = np.asarray(encoder(w_gen), dtype=np.float64)
    if e_real.ndim != 2 or e_gen.ndim != 2:
        raise ShapeError("encoder must return 2-D (n, d) embeddings")
    return frechet_distance(gaussian_stats(e_real), gaussian_stats(e_gen))


class GestureFeatureEncoder:
    """Two-layer temporal-convolution autoencoder over gesture windows.

    Calling a fitted instance returns the time-pooled bottleneck embedding
    (default 32-dim) per window; fit() trains by window reconstruction on
    real data only.
    """

    def __init__(self, channels: int, window: int = 40, d_embed: int = 32,
                 seed: int = 0):
        if channels < 1 or window < 2:
            raise ValueError("encoder needs channels >= 1 and window >= 2")
        self.channels = channels
        self.window = window
        self.d_embed = d_embed
        self.trained = False
        self.encoder = nn.Sequential(
            nn.Conv1d(channels, 64, kernel_size=5, stride=2, padding=2),
            nn.SiLU(),
            nn.Conv1d(64, d_embed, kernel_size=5, stride=2, padding=2),
        )
        self.decoder = nn.Linear(d_embed, channels * window)
        gen = rngmod.stream(seed, "feature-encoder")
        for param in self._parameters_list():
            _fill_uniform(param, 0.1, gen)

    def _parameters_list(self):
        return list(self.encoder.parameters()) + list(self.decoder.parameters())

    def _embed(self, windows: torch.Tensor) -> torch.Tensor:
        hidden = self.encoder(windows.transpose(1, 2))
        return hidden.mean(dim=2)

    def fit(self, windows: np.ndarray, steps: int = 200, lr: float = 1e-3,
            batch_size: int = 64, seed: int = 0) -> "GestureFeatureEncoder":
        data = torch.as_tensor(np.asarray(windows, dtype=np.float32))
        if data.ndim != 3 or data.shape[1] != self.window \
                or data.shape[2] != self.channels:
            raise ShapeError(
                f"windows must be (n, {self.window}, {self.channels})")
        flat = data.reshape(data.shape[0], -1)
        opt = torch.optim.Adam(self._parameters_list(), lr=lr)
        order = rngmod.stream(seed, "feature-batches")
        take = min(batch_size, data.shape[0])
        for _ in range(steps):
            idx = torch.from_numpy(order.integers(0, data.shape[0], size=take))
            loss = F.mse_loss(self.decoder(self._embed(data[idx])), flat[idx])
            opt.zero_grad()
            loss.backward()
            opt.step()
        self.trained = True
        return self

    def __call__(self, windows: np.ndarray) -> np.ndarray:
        if not self.trained:
            raise ValueError(
                "feature encoder is untrained; fit it on real windows first")
        data = torch.as_tensor(np.asarray(windows, dtype=np.float32))
        with torch.no_grad():
            emb = self._embed(data)
        return emb.numpy().astype(np.float64)


def audio_beats(wave: np.ndarray, sample_rate: int = 16000,
                min_separation_s: float = 0.2) -> BeatList:
    """Spectral-flux onset detection with greedy minimum-separation picking."""
    wave = np.asarray(wave, dtype=np.float64)
    if wave.ndim != 1:
        raise ShapeError("audio must be mono 1-D samples")
    if wave.size == 0:
        raise ValueError("cannot detect beats in empty audio")
    win = int(round(0.025 * sample_rate))
    hop = int(round(0.010 * sample_rate))
    n_frames = max(1, int(math.floor(wave.size / hop + 0.5)))
    # frames centered on k*hop so onsets at t=0 survive the Hann taper
    padded = np.pad(wave, (win // 2,
                           max(0, (n_frames - 1) * hop + win - wave.size)))
    idx = np.arange(win)[None, :] + hop * np.arange(n_frames)[:, None]
    hann = np.hanning(win + 1)[:-1]
    mags = np.abs(np.fft.rfft(padded[idx] * hann, axis=1))
    prev = np.vstack([np.zeros((1, mags.shape[1])), mags[:-1]])
    flux = np.clip(mags - prev, 0.0, None).sum(axis=1)
    if flux.max() <= 1e-12:
        return BeatList(times=np.zeros(0))
    threshold = flux.mean() + flux.std()
    left = np.concatenate([[-np.inf], flux[:-1]])
    right = np.concatenate([flux[1:], [-np.inf]])
    candidates = np.flatnonzero((flux > threshold) & (flux > left) & (flux >= right))
    min_gap = max(1, int(round(min_separation_s * sample_rate / hop)))
    picked: list = []
    for k in sorted(candidates, key=lambda k: (-flux[k], k)):
        if all(abs(k - other) >= min_gap for other in picked):
            picked.append(k)
    times = np.sort(np.array(picked, dtype=np.float64) * hop / sample_rate)
    return BeatList(times=times)


def gesture_beats(gesture) -> BeatList:
    """Beats = strict local minima of the mean joint angular speed that dip
    below its centered running mean (1 s window)."""
    frames = np.asarray(gesture.frames, dtype=np.float64)
    if frames.shape[0] < 3:
        raise ValueError("gesture beats need at least 3 frames")
    width = frames.shape[1]
    if width < 9 or (width - 6) % 3:
        raise ShapeError(f"channel count {width} does not fit the D+6 layout")
    n_joints = (width - 6) // 3
    exp = frames[:, :-6].reshape(frames.shape[0], n_joints, 3)
    theta = np.linalg.norm(exp, axis=2)
    small = theta < 1e-12
    safe = np.where(small, 1.0, theta)
    axis = exp / safe[..., None]
    # relative angle between consecutive frames from the quaternion dot product
    half = theta / 2
    q = np.concatenate([np.sin(half)[..., None] * axis,
                        np.cos(half)[..., None]], axis=2)
    dots = np.clip(np.abs(np.sum(q[:-1] * q[1:], axis=2)), 0.0, 1.0)
    speed = (2.0 * np.arccos(dots)).mean(axis=1)
    window = max(3, int(round(gesture.fps)))
    kernel = np.ones(window)
    running = (np.convolve(speed, kernel, mode="same")
               / np.convolve(np.ones_like(speed), kernel, mode="same"))
    inner = slice(1, speed.size - 1)
    # the 0.9 factor keeps float-quantization jitter on near-constant speed
    # tracks from registering as minima
    minima = np.flatnonzero(
        (speed[inner] < speed[:-2]) & (speed[inner] < speed[2:])
        & (speed[inner] < 0.9 * running[inner])) + 1
    return BeatList(times=(minima + 1) / gesture.fps)


def beat_align(gesture_beats_list, audio_beats_list,
               sigma_s: float = 0.1) -> float:
    """Mean Gaussian proximity of each gesture beat to its nearest audio beat."""
    gb = np.asarray(getattr(gesture_beats_list, "times", gesture_beats_list),
                    dtype=np.float64)
    ab = np.asarray(getattr(audio_beats_list, "times", audio_beats_list),
                    dtype=np.float64)
    if gb.size == 0 or ab.size == 0:
        warnings.warn("empty beat list; BeatAlign defined as 0.0", stacklevel=2)
        return 0.0
    nearest_sq = np.min((gb[:, None] - ab[None, :]) ** 2, axis=1)
    return float(np.mean(np.exp(-nearest_sq / (2.0 * sigma_s ** 2))))
