"""Scaling benchmark: parameter counts and wall-clock vs sequence length.

Times the denoiser forward pass and the full sampling loop for each model
variant, and includes a quadratic single-head attention stand-in so the
linear-time claim has a same-harness reference point.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
from torch import nn

from . import rng as rngmod
from .condition import ExtractorConfig
from .denoiser import DenoiserConfig
from .diffusion import build_schedule, sample
from .model import GestureModel
from .ssm import _fill_uniform

VARIANTS = ("mamba2", "mamba1", "convse", "attention")


@dataclass
class BenchRow:
    variant: str
    length: int
    parameters: int
    forward_ms: float
    sample_ms: float | None


class AttentionStandIn(nn.Module):
    """Single-head softmax attention denoiser of matching width.

    Deliberately quadratic in sequence length; everything else (channel
    encode/decode, conditioning add) mirrors the linear-time denoiser so
    timing differences isolate the mixing layer.
    """

    def __init__(self, channels: int, d_hidden: int = 64, seed: int = 0):
        super().__init__()
        self.encode = nn.Linear(channels, d_hidden)
        self.qkv = nn.Linear(d_hidden, 3 * d_hidden)
        self.out = nn.Linear(d_hidden, d_hidden)
        self.decode = nn.Linear(d_hidden, channels)
        self.scale = d_hidden ** -0.5
        gen = rngmod.stream(seed, "attention-standin")
        for param in self.parameters():
            _fill_uniform(param, 0.05, gen)

    def forward(self, g: torch.Tensor, cond: torch.Tensor) -> torch.Tensor:
        z = self.encode(g) + cond
        q, k, v = self.qkv(z).chunk(3, dim=-1)
        scores = torch.softmax(q @ k.transpose(-2, -1) * self.scale, dim=-1)
        return self.decode(self.out(scores @ v))


def build_bench_model(variant: str, channels: int = 12, d_hidden: int = 64,
                      seed: int = 0):
    """Model under test for a bench variant.

    mamba2/mamba1 switch the denoiser scan kernel; convse swaps the style
    extractor for the strided-conv ablation; attention returns the
    quadratic stand-in (no extractor).
    """
    if variant == "attention":
        return AttentionStandIn(channels, d_hidden=d_hidden, seed=seed)
    if variant not in ("mamba2", "mamba1", "convse"):
        raise ValueError(f"unknown bench variant {variant!r}")
    denoiser_variant = "mamba1" if variant == "mamba1" else "mamba2"
    style = "conv" if variant == "convse" else "mamba"
    extractor_cfg = ExtractorConfig(
        d_feature=80, d_hidden=d_hidden, style=style,
        style_d_state=16, style_head_dim=8, style_chunk_len=32)
    denoiser_cfg = DenoiserConfig(
        gesture_channels=channels, num_blocks=3, d_hidden=d_hidden,
        d_state=16, head_dim=16, chunk_len=32, variant=denoiser_variant)
    return GestureModel(extractor_cfg, denoiser_cfg, seed=seed)


def _time_call(fn, repeats: int) -> float:
    """Best-of wall-clock in milliseconds (min filters scheduler noise)."""
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best * 1e3


def run_bench(variant: str = "mamba2", lengths=(200, 400, 800, 1600),
              repeats: int = 5, channels: int = 12, d_hidden: int = 64,
              sample_steps: int = 10, include_sampling: bool = True,
              seed: int = 0, out_csv=None) -> list:
    """Per-length forward and sampling wall-clock for one variant."""
    model = build_bench_model(variant, channels=channels, d_hidden=d_hidden,
                              seed=seed)
    params = sum(p.numel() for p in model.parameters())
    gen = rngmod.stream(seed, "bench-inputs")
    sched = build_schedule(sample_steps, 1e-4, 8e-2) if include_sampling \
        else None
    rows = []
    for length in lengths:
        g = torch.from_numpy(
            gen.standard_normal((1, length, channels)).astype(np.float32))
        cond = torch.from_numpy(
            gen.standard_normal((1, length, d_hidden)).astype(np.float32))
        if variant == "attention":
            forward = lambda: model(g, cond)  # noqa: E731
        else:
            forward = lambda: model.denoiser(g, cond)  # noqa: E731
        with torch.no_grad():
            forward()  # warm up allocator and kernels before timing
            forward_ms = _time_call(forward, repeats)
            sample_ms = None
            if include_sampling and variant != "attention":
                rate = model.extractor.cfg.feature_rate_hz
                fps = model.extractor.cfg.target_fps
                z_a = torch.from_numpy(gen.standard_normal(
                    (length * rate // fps, 80)).astype(np.float32))
                start = time.perf_counter()
                sample(model, z_a, sched, seed=seed)
                sample_ms = (time.perf_counter() - start) * 1e3
        rows.append(BenchRow(variant=variant, length=int(length),
                             parameters=params, forward_ms=forward_ms,
                             sample_ms=sample_ms))
    if out_csv is not None:
        write_bench_csv(out_csv, rows)
    return rows


def write_bench_csv(path, rows) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["variant", "length", "parameters", "forward_ms",
                         "sample_ms"])
        for row in rows:
            writer.writerow([
                row.variant, row.length, row.parameters,
                f"{row.forward_ms:.3f}",
                "" if row.sample_ms is None else f"{row.sample_ms:.3f}"])
