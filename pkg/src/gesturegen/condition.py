"""Condition extractor: raw speech to the denoiser's conditioning sequence.

Path: audio features z_a (pluggable backend) -> global style token z_last
(last output of one Mamba block, or a conv pyramid ablation) -> broadcast
concat fusion -> kernel-201 strided downsampling to the gesture frame rate
-> diffusion-step embedding added per step, yielding c_{1:T}.

Also owns the binary feature interchange format (DIMF) that externalizes
pretrained speech encoders.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
import torch.nn.functional as F
from torch import Tensor, nn

from . import rng as rngmod
from .errors import ConfigError, FormatError, ShapeError
from .ssm import MambaBlock, MambaBlockConfig, _fill_uniform

__all__ = [
    "FeatureSequence",
    "MelBackend",
    "InterchangeBackend",
    "extract_features",
    "load_dimf",
    "save_dimf",
    "check_dimf",
    "ExtractorConfig",
    "ConditionExtractor",
    "ConvStyleExtractor",
    "fuse_broadcast",
    "sinusoidal_embed",
]

_DIMF_MAGIC = b"DIMF"
_DIMF_VERSION = 1
_HEADER = struct.Struct("<4sIIIf")  # magic, version, T', D', frame_rate_hz


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


@dataclass
class FeatureSequence:
    """Audio latent features z_a at a fixed frame rate."""

    z_a: np.ndarray  # (T', D') float32
    frame_rate_hz: float
    source: str

    def __post_init__(self) -> None:
        if self.z_a.ndim != 2 or self.z_a.shape[1] < 1:
            raise ShapeError("z_a must be (T', D') with D' >= 1")
        if self.frame_rate_hz <= 0:
            raise ValueError("frame_rate_hz must be positive")

    @property
    def duration_s(self) -> float:
        return self.z_a.shape[0] / self.frame_rate_hz


def load_dimf(path) -> FeatureSequence:
    """Read a feature interchange file, validating header and payload size."""
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise FormatError(f"{path}: truncated header ({len(raw)} bytes)")
    magic, version, t_prime, d_prime, rate = _HEADER.unpack(raw[: _HEADER.size])
    if magic != _DIMF_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    if version != _DIMF_VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    if d_prime < 1:
        raise FormatError(f"{path}: D' must be >= 1, header says {d_prime}")
    expect = 4 * t_prime * d_prime
    payload = raw[_HEADER.size:]
    if len(payload) != expect:
        raise FormatError(
            f"{path}: payload is {len(payload)} bytes, header implies {expect}"
        )
    z_a = np.frombuffer(payload, dtype="<f4").reshape(t_prime, d_prime).copy()
    return FeatureSequence(z_a=z_a, frame_rate_hz=rate, source="interchange-file")


def save_dimf(path, features: FeatureSequence) -> None:
    z_a = np.ascontiguousarray(features.z_a, dtype="<f4")
    header = _HEADER.pack(_DIMF_MAGIC, _DIMF_VERSION, z_a.shape[0], z_a.shape[1],
                          features.frame_rate_hz)
    Path(path).write_bytes(header + z_a.tobytes())


def check_dimf(path) -> dict:
    """Validate a DIMF file; returns header facts for reporting."""
    feats = load_dimf(path)
    return {
        "frames": int(feats.z_a.shape[0]),
        "channels": int(feats.z_a.shape[1]),
        "frame_rate_hz": float(feats.frame_rate_hz),
    }


def _mel_filters(n_mels: int, n_fft: int, sr: int, fmin: float, fmax: float) -> np.ndarray:
    def hz2mel(f):
        return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)

    def mel2hz(m):
        return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)

    pts = mel2hz(np.linspace(hz2mel(fmin), hz2mel(fmax), n_mels + 2))
    freqs = np.arange(n_fft // 2 + 1) * sr / n_fft
    filt = np.zeros((n_mels, freqs.size))
    for i in range(n_mels):
        lo, mid, hi = pts[i], pts[i + 1], pts[i + 2]
        rising = (freqs - lo) / (mid - lo)
        falling = (hi - freqs) / (hi - mid)
        filt[i] = np.clip(np.minimum(rising, falling), 0.0, None)
    return filt


class MelBackend:
    """Built-in log-mel frontend: 80 bins, 25 ms window, 10 ms hop (100 Hz)."""

    def __init__(self, n_mels: int = 80, win: int = 400, hop: int = 160,
                 n_fft: int = 512, sample_rate: int = 16000, fmax: float = 8000.0,
                 floor: float = 1e-10):
        self.n_mels = n_mels
        self.win = win
        self.hop = hop
        self.n_fft = n_fft
        self.sample_rate = sample_rate
        self.floor = floor
        self.frame_rate_hz = sample_rate / hop
        self._window = np.hanning(win + 1)[:-1]
        self._filters = _mel_filters(n_mels, n_fft, sample_rate, 0.0, fmax)

    def extract(self, wave: np.ndarray) -> FeatureSequence:
        wave = np.asarray(wave, dtype=np.float32)
        n_frames = _round_half_up(wave.size / self.hop)
        if n_frames == 0:
            z_a = np.zeros((0, self.n_mels), dtype=np.float32)
        else:
            need = (n_frames - 1) * self.hop + self.win
            padded = np.pad(wave, (0, max(0, need - wave.size)))
            idx = self.hop * np.arange(n_frames)[:, None] + np.arange(self.win)[None, :]
            spec = np.abs(np.fft.rfft(padded[idx] * self._window, n=self.n_fft, axis=1)) ** 2
            mel = spec @ self._filters.T
            z_a = np.log(np.maximum(mel, self.floor)).astype(np.float32)
        return FeatureSequence(z_a=z_a, frame_rate_hz=self.frame_rate_hz,
                               source="mel-builtin")


class InterchangeBackend:
    """Backend that reads precomputed features from a DIMF file verbatim."""

    def __init__(self, path):
        self.path = Path(path)

    def extract(self, wave: np.ndarray) -> FeatureSequence:
        return load_dimf(self.path)


def extract_features(wave: np.ndarray, sample_rate: int, backend) -> FeatureSequence:
    """Run a feature backend over mono 16 kHz samples."""
    if sample_rate != 16000:
        raise ValueError(f"features require 16000 Hz input, got {sample_rate}")
    return backend.extract(wave)


def fuse_broadcast(z_a: Tensor, z_last: Tensor) -> Tensor:
    """Concatenate z_a with the style token repeated along time: (T', 2*D')."""
    if z_a.shape[-1] != z_last.shape[-1]:
        raise ShapeError(
            f"feature width mismatch: z_a {z_a.shape[-1]}, z_last {z_last.shape[-1]}"
        )
    if z_last.shape[-2] != 1:
        raise ShapeError("z_last must be a single token")
    return torch.cat([z_a, z_last.expand_as(z_a)], dim=-1)


def sinusoidal_embed(n, dim: int) -> Tensor:
    """Interleaved sin/cos step embedding: [sin(n w_0), cos(n w_0), ...]."""
    if dim % 2 != 0:
        raise ValueError("embedding dimension must be even")
    n_t = torch.as_tensor(n, dtype=torch.float32)
    half = dim // 2
    freqs = torch.exp(torch.arange(half, dtype=torch.float32) * (-math.log(10000.0) / half))
    ang = n_t[..., None] * freqs
    return torch.stack([torch.sin(ang), torch.cos(ang)], dim=-1).flatten(-2)


@dataclass
class ExtractorConfig:
    """Extractor hyperparameters. d_feature is D' (80 for the mel backend,
    whatever the interchange header says otherwise); d_hidden is D''."""

    d_feature: int
    d_hidden: int
    feature_rate_hz: int = 100
    target_fps: int = 20
    style: str = "mamba"
    style_d_state: int = 64
    style_head_dim: int = 16
    style_chunk_len: int = 32
    style_conv_width: int = 4
    style_expand: int = 2
    down_kernel: int = 201

    def __post_init__(self) -> None:
        if self.style not in ("mamba", "conv"):
            raise ValueError(f"unknown style extractor {self.style!r}")
        if self.d_hidden % 2 != 0:
            raise ValueError("d_hidden must be even for the sinusoidal embedding")
        if self.down_kernel % 2 != 1:
            raise ValueError("down_kernel must be odd for symmetric padding")
        self.stride_for(self.feature_rate_hz)

    def stride_for(self, feature_rate_hz: float) -> int:
        stride = feature_rate_hz / self.target_fps
        if stride != int(stride) or stride < 1:
            raise ConfigError(
                f"feature rate {feature_rate_hz} Hz does not give an integer stride "
                f"over target fps {self.target_fps}"
            )
        return int(stride)


class ConvStyleExtractor(nn.Module):
    """Ablation style extractor: weight-tied strided conv pyramid pooling
    T' frames to one token, then a linear projection."""

    def __init__(self, d_feature: int, rng: np.random.Generator | None = None,
                 seed: int = 0, kernel: int = 5, stride: int = 4):
        super().__init__()
        gen = rng if rng is not None else rngmod.stream(seed, "conv-style")
        self.kernel = kernel
        self.stride = stride
        self.stage = nn.Conv1d(d_feature, d_feature, kernel)
        self.proj = nn.Linear(d_feature, d_feature)
        bound = 1.0 / math.sqrt(d_feature * kernel)
        _fill_uniform(self.stage.weight, bound, gen)
        _fill_uniform(self.stage.bias, bound, gen)
        _fill_uniform(self.proj.weight, 1.0 / math.sqrt(d_feature), gen)
        _fill_uniform(self.proj.bias, 1.0 / math.sqrt(d_feature), gen)

    def forward(self, z_a: Tensor) -> Tensor:
        squeeze = z_a.dim() == 2
        x = (z_a[None] if squeeze else z_a).transpose(1, 2)
        pad = (self.kernel - 1) // 2
        while x.shape[-1] > 1:
            x = F.conv1d(F.pad(x, (pad, pad), mode="replicate"),
                         self.stage.weight, self.stage.bias, stride=self.stride)
        token = self.proj(x.transpose(1, 2))
        return token[0] if squeeze else token


class ConditionExtractor(nn.Module):
    """Maps audio features to the step-conditioned denoiser condition."""

    def __init__(self, cfg: ExtractorConfig, rng: np.random.Generator | None = None,
                 seed: int = 0):
        super().__init__()
        gen = rng if rng is not None else rngmod.stream(seed, "condition-extractor")
        self.cfg = cfg
        if cfg.style == "mamba":
            self.style = MambaBlock(
                MambaBlockConfig(
                    d_model=cfg.d_feature, d_state=cfg.style_d_state,
                    conv_width=cfg.style_conv_width, expand=cfg.style_expand,
                    variant="mamba2", chunk_len=cfg.style_chunk_len,
                    head_dim=cfg.style_head_dim,
                ),
                rng=gen,
            )
        else:
            self.style = ConvStyleExtractor(cfg.d_feature, rng=gen)
        self.down = nn.Conv1d(2 * cfg.d_feature, cfg.d_hidden, cfg.down_kernel)
        self.step_mlp = nn.Sequential(
            nn.Linear(cfg.d_hidden, cfg.d_hidden), nn.SiLU(),
            nn.Linear(cfg.d_hidden, cfg.d_hidden),
        )
        # 1/fan_in (not 1/sqrt) keeps z_l O(1) even when the feature floor
        # puts a large DC offset on every input channel; the conditioning
        # path is meant to start near-inert, like the zero-init modulation.
        bound = 1.0 / (2 * cfg.d_feature * cfg.down_kernel)
        _fill_uniform(self.down.weight, bound, gen)
        _fill_uniform(self.down.bias, bound, gen)
        for layer in (self.step_mlp[0], self.step_mlp[2]):
            _fill_uniform(layer.weight, 1.0 / math.sqrt(cfg.d_hidden), gen)
            _fill_uniform(layer.bias, 1.0 / math.sqrt(cfg.d_hidden), gen)

    def style_token(self, z_a: Tensor) -> Tensor:
        """Global style token, shape (..., 1, D')."""
        if z_a.shape[-2] < 1:
            raise ShapeError("cannot extract a style token from an empty sequence")
        if z_a.shape[-1] != self.cfg.d_feature:
            raise ShapeError(
                f"expected {self.cfg.d_feature} feature channels, got {z_a.shape[-1]}"
            )
        if self.cfg.style == "conv":
            return self.style(z_a)
        return self.style(z_a)[..., -1:, :]

    def downsample_to_frames(self, fused: Tensor, feature_rate_hz: float | None = None) -> Tensor:
        """Kernel-201 strided conv from feature rate to gesture frame rate."""
        rate = self.cfg.feature_rate_hz if feature_rate_hz is None else feature_rate_hz
        stride = self.cfg.stride_for(rate)
        if fused.shape[-1] != 2 * self.cfg.d_feature:
            raise ShapeError(
                f"fused width must be {2 * self.cfg.d_feature}, got {fused.shape[-1]}"
            )
        t_prime = fused.shape[-2]
        if t_prime < 1:
            raise ShapeError("cannot downsample an empty sequence")
        squeeze = fused.dim() == 2
        x = (fused[None] if squeeze else fused).transpose(1, 2)
        pad = (self.cfg.down_kernel - 1) // 2
        x = F.pad(x, (pad, pad), mode="replicate")
        y = F.conv1d(x, self.down.weight, self.down.bias, stride=stride).transpose(1, 2)
        t_target = _round_half_up(t_prime * self.cfg.target_fps / rate)
        if y.shape[1] > t_target:
            y = y[:, :t_target]
        elif y.shape[1] < t_target:
            y = torch.cat([y, y[:, -1:].expand(-1, t_target - y.shape[1], -1)], dim=1)
        return y[0] if squeeze else y

    def unified_latent(self, z_a: Tensor, frame_rate_hz: float | None = None) -> Tensor:
        """z_l: style-fused features downsampled to gesture frames, (T, D'')."""
        token = self.style_token(z_a)
        return self.downsample_to_frames(fuse_broadcast(z_a, token), frame_rate_hz)

    def build_condition(self, z_l: Tensor, n, n_total: int | None = None) -> Tensor:
        """c = z_l + step_mlp(sinusoidal_embed(n)), broadcast over frames."""
        n_t = torch.as_tensor(n)
        if (n_t < 1).any():
            raise ValueError(f"diffusion step must be >= 1, got {n}")
        if n_total is not None and (n_t > n_total).any():
            raise ValueError(f"diffusion step {n} out of range 1..{n_total}")
        emb = sinusoidal_embed(n_t, self.cfg.d_hidden).to(z_l.dtype)
        offset = self.step_mlp(emb)
        return z_l + offset[..., None, :]
