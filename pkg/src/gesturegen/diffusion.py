"""DDPM machinery: noise schedule, forward noising, reverse updates,
the training loop, and the annealed Langevin sampler.

Steps are 1-indexed (n in 1..N); schedule arrays are 0-indexed, so the
value for step n lives at index n-1. All stochastic draws come from named
Philox streams ("batch", "steps", "noise" for training, "sample" for
generation) whose states are checkpointed, making runs exactly resumable.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
import torch.nn.functional as F
from torch import Tensor

from . import rng as rngmod
from .checkpoint import load_checkpoint, restore_streams, save_checkpoint
from .errors import NumericError, ShapeError

__all__ = [
    "NoiseSchedule",
    "TrainConfig",
    "TrainResult",
    "build_schedule",
    "q_sample",
    "posterior_params",
    "denoise_step",
    "training_step",
    "train",
    "sample",
]


@dataclass
class NoiseSchedule:
    """Variance schedule and the arrays derived from it.

    beta_tilde holds the posterior variances (1-abar^{n-1})/(1-abar^n)*beta^n
    with the n=1 entry defined as beta^1 (it never multiplies noise because
    the sampler draws no z at the final step).
    """

    beta: np.ndarray
    alpha: np.ndarray
    alpha_bar: np.ndarray
    beta_tilde: np.ndarray
    n_steps: int

    def __post_init__(self) -> None:
        for name in ("beta", "alpha", "alpha_bar", "beta_tilde"):
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            setattr(self, name, arr)
            if arr.shape != (self.n_steps,):
                raise ValueError(f"{name} must have shape ({self.n_steps},)")
        if not np.all((self.beta > 0) & (self.beta < 1)):
            raise ValueError("beta values must lie strictly inside (0, 1)")
        if np.any(np.diff(self.beta) <= 0):
            raise ValueError("beta must be strictly increasing")
        if not np.all((self.alpha_bar > 0) & (self.alpha_bar < 1)):
            raise ValueError("alpha_bar must lie strictly inside (0, 1)")
        if np.any(np.diff(self.alpha_bar) >= 0):
            raise ValueError("alpha_bar must be strictly decreasing")

    @classmethod
    def from_beta(cls, beta: np.ndarray) -> "NoiseSchedule":
        beta = np.asarray(beta, dtype=np.float64)
        alpha = 1.0 - beta
        alpha_bar = np.cumprod(alpha)
        prev = np.concatenate([[1.0], alpha_bar[:-1]])
        beta_tilde = (1.0 - prev) / (1.0 - alpha_bar) * beta
        beta_tilde[0] = beta[0]
        return cls(beta=beta, alpha=alpha, alpha_bar=alpha_bar,
                   beta_tilde=beta_tilde, n_steps=int(beta.size))


def build_schedule(n_steps: int = 1000, beta1: float = 1e-4,
                   beta_n: float = 8e-2) -> NoiseSchedule:
    """Linear schedule: beta^n = beta1 + (n-1)/(N-1) * (beta_n - beta1)."""
    if n_steps < 1:
        raise ValueError(f"n_steps must be >= 1, got {n_steps}")
    if not 0.0 < beta1 < beta_n < 1.0:
        raise ValueError(f"need 0 < beta1 < beta_n < 1, got {beta1}, {beta_n}")
    if n_steps == 1:
        beta = np.array([beta1])
    else:
        beta = beta1 + np.arange(n_steps) / (n_steps - 1) * (beta_n - beta1)
    return NoiseSchedule.from_beta(beta)


def _step_values(arr: np.ndarray, n, like: Tensor) -> Tensor:
    """Schedule values for step(s) n, shaped to broadcast against ``like``."""
    n_t = torch.as_tensor(n, dtype=torch.long)
    if (n_t < 1).any() or (n_t > arr.size).any():
        raise ValueError(f"diffusion step {n} out of range 1..{arr.size}")
    vals = torch.from_numpy(arr)[n_t - 1].to(like.dtype)
    if n_t.dim() > 0:
        vals = vals.view(*n_t.shape, *([1] * (like.dim() - n_t.dim())))
    return vals


def q_sample(g0: Tensor, n, eps: Tensor, sched: NoiseSchedule) -> Tensor:
    """Forward noising: g^n = sqrt(abar^n) g^0 + sqrt(1 - abar^n) eps."""
    if eps.shape != g0.shape:
        raise ShapeError(f"eps shape {tuple(eps.shape)} != g0 shape {tuple(g0.shape)}")
    ab = _step_values(sched.alpha_bar, n, g0)
    return ab.sqrt() * g0 + (1.0 - ab).sqrt() * eps


def posterior_params(g_n: Tensor, g0: Tensor, n: int,
                     sched: NoiseSchedule) -> tuple[Tensor, float]:
    """Posterior mean and variance of g^{n-1} given (g^n, g^0).

    n=1 is admitted by defining abar^0 := 1, which collapses the mean onto
    g^0 exactly.
    """
    if g_n.shape != g0.shape:
        raise ShapeError(f"g_n shape {tuple(g_n.shape)} != g0 shape {tuple(g0.shape)}")
    if not 1 <= n <= sched.n_steps:
        raise ValueError(f"diffusion step {n} out of range 1..{sched.n_steps}")
    ab_n = float(sched.alpha_bar[n - 1])
    ab_prev = 1.0 if n == 1 else float(sched.alpha_bar[n - 2])
    coef0 = math.sqrt(ab_prev) * float(sched.beta[n - 1]) / (1.0 - ab_n)
    coefn = math.sqrt(float(sched.alpha[n - 1])) * (1.0 - ab_prev) / (1.0 - ab_n)
    return coef0 * g0 + coefn * g_n, float(sched.beta_tilde[n - 1])


def denoise_step(g_n: Tensor, eps_hat: Tensor, n: int, sched: NoiseSchedule,
                 z: Tensor | None = None) -> Tensor:
    """One reverse update: (g^n - beta^n/sqrt(1-abar^n) eps_hat)/sqrt(alpha^n),
    plus sqrt(beta_tilde^n) z when Langevin noise is supplied."""
    if eps_hat.shape != g_n.shape:
        raise ShapeError(
            f"eps_hat shape {tuple(eps_hat.shape)} != g_n shape {tuple(g_n.shape)}")
    if not 1 <= n <= sched.n_steps:
        raise ValueError(f"diffusion step {n} out of range 1..{sched.n_steps}")
    coef = float(sched.beta[n - 1]) / math.sqrt(1.0 - float(sched.alpha_bar[n - 1]))
    out = (g_n - coef * eps_hat) / math.sqrt(float(sched.alpha[n - 1]))
    if z is not None:
        if z.shape != g_n.shape:
            raise ShapeError(f"z shape {tuple(z.shape)} != g_n shape {tuple(g_n.shape)}")
        out = out + math.sqrt(float(sched.beta_tilde[n - 1])) * z
    return out


def training_step(model, gestures: Tensor, features: Tensor, sched: NoiseSchedule,
                  steps_rng: np.random.Generator, noise_rng: np.random.Generator,
                  feature_rate_hz: float | None = None) -> Tensor:
    """Denoising loss for one batch; returns the loss with its graph attached.

    Draw order is part of the resume contract: step indices come from
    ``steps_rng`` (uniform over 1..N, one per item), then noise from
    ``noise_rng`` (standard normal in float32, one tensor per batch).
    """
    if gestures.dim() != 3 or features.dim() != 3:
        raise ShapeError("expected batched (B, T, C) gestures and (B, T', D') features")
    if gestures.shape[0] != features.shape[0]:
        raise ShapeError(
            f"batch mismatch: {gestures.shape[0]} gestures vs {features.shape[0]} features")
    z_l = model.condition_stack(features, feature_rate_hz)
    if z_l.shape[-2] != gestures.shape[1]:
        raise ShapeError(
            f"duration mismatch: audio implies {z_l.shape[-2]} frames, "
            f"gestures have {gestures.shape[1]}")
    n = torch.from_numpy(steps_rng.integers(1, sched.n_steps + 1,
                                            size=gestures.shape[0]))
    eps = torch.from_numpy(noise_rng.standard_normal(
        size=tuple(gestures.shape), dtype=np.float32)).to(gestures.dtype)
    g_n = q_sample(gestures, n, eps, sched)
    eps_hat = model.denoise(g_n, z_l, n, sched.n_steps)
    return F.mse_loss(eps_hat, eps)


@dataclass
class TrainConfig:
    batch_size: int = 32
    learning_rate: float = 1e-4
    max_steps: int = 200
    seed: int = 0
    checkpoint_every: int = 0
    feature_rate_hz: float | None = None

    def __post_init__(self) -> None:
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be >= 0")
        if self.checkpoint_every < 0:
            raise ValueError("checkpoint_every must be >= 0")


@dataclass
class TrainResult:
    losses: list
    checkpoint_path: Path
    csv_path: Path
    step: int


def train(model, dataset, sched: NoiseSchedule, cfg: TrainConfig, out_dir,
          resume_from=None, extra: dict | None = None) -> TrainResult:
    """Adam loop over training_step with per-step CSV logging.

    ``dataset`` is any indexable of (gesture (T, C), features (T', D'))
    pairs; batches are drawn with replacement from the "batch" stream.
    ``max_steps`` counts total optimizer steps, so resuming from a step-k
    checkpoint runs steps k+1..max_steps and reproduces an uninterrupted
    run bit-exactly.
    """
    if len(dataset) == 0:
        raise ValueError("cannot train on an empty dataset")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    optimizer = torch.optim.Adam(model.parameters(), lr=cfg.learning_rate)
    streams = {name: rngmod.stream(cfg.seed, name)
               for name in ("batch", "steps", "noise")}
    start = 0
    if resume_from is not None:
        payload = load_checkpoint(resume_from)
        model.load_state_dict(payload["model"])
        optimizer.load_state_dict(payload["optimizer"])
        streams = restore_streams(payload)
        start = int(payload["step"])
        if start >= cfg.max_steps:
            raise ValueError(
                f"checkpoint is at step {start}, nothing to do before {cfg.max_steps}")

    csv_path = out_dir / "loss.csv"
    losses: list = []
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step", "loss", "lr"])
        for step in range(start + 1, cfg.max_steps + 1):
            idx = streams["batch"].integers(0, len(dataset), size=cfg.batch_size)
            g0 = torch.stack([torch.as_tensor(dataset[i][0]) for i in idx])
            z_a = torch.stack([torch.as_tensor(dataset[i][1]) for i in idx])
            loss = training_step(model, g0, z_a, sched, streams["steps"],
                                 streams["noise"], cfg.feature_rate_hz)
            value = loss.item()
            if not math.isfinite(value):
                raise NumericError(f"non-finite loss {value} at step {step}")
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            losses.append(value)
            writer.writerow([step, f"{value:.8f}", cfg.learning_rate])
            if cfg.checkpoint_every and step % cfg.checkpoint_every == 0:
                save_checkpoint(out_dir / f"checkpoint_{step:06d}.pt", step=step,
                                model=model, optimizer=optimizer, streams=streams,
                                sched=sched, train_cfg=cfg, extra=extra)
    final = save_checkpoint(out_dir / "checkpoint_final.pt", step=cfg.max_steps,
                            model=model, optimizer=optimizer, streams=streams,
                            sched=sched, train_cfg=cfg, extra=extra)
    return TrainResult(losses=losses, checkpoint_path=final, csv_path=csv_path,
                       step=cfg.max_steps)


def sample(model, z_a: Tensor, sched: NoiseSchedule, seed: int = 0, *,
           feature_rate_hz: float | None = None, langevin_noise: bool = True) -> Tensor:
    """Generate one gesture sequence from audio features.

    The whole sequence is denoised jointly from step N down to 1 (nothing
    autoregressive). Deterministic given (weights, z_a, seed); at n=1 no
    Langevin noise is added. ``langevin_noise=False`` suppresses the z term
    at every step, which makes the recursion analytically checkable.
    """
    z_l = model.condition_stack(torch.as_tensor(z_a), feature_rate_hz)
    if z_l.dim() != 2:
        raise ShapeError("sampling expects a single unbatched feature sequence")
    shape = (z_l.shape[0], model.gesture_channels)
    gen = rngmod.stream(seed, "sample")
    g = torch.from_numpy(gen.standard_normal(size=shape, dtype=np.float32))
    with torch.no_grad():
        for n in range(sched.n_steps, 0, -1):
            eps_hat = model.denoise(g, z_l, n, sched.n_steps)
            z = None
            if n > 1 and langevin_noise:
                z = torch.from_numpy(gen.standard_normal(size=shape, dtype=np.float32))
            g = denoise_step(g, eps_hat, n, sched, z)
    return g
