"""The noise-prediction network epsilon_theta.

Pipeline per diffusion step: gesture_encode (kernel-3 conv) -> M stacked
AdaLN Mamba blocks modulated by the condition sequence -> modulated final
layer -> gesture_decode (kernel-1 conv) back to gesture channels.

Modulation projections are zero-initialized, which makes every AdaLN block
the exact identity map at init and the whole network a fixed linear readout
of the encoded input — the standard stable starting point for diffusion
training.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import torch
from torch import Tensor, nn

from . import rng as rngmod
from .errors import ShapeError
from .ssm import MambaBlock, MambaBlockConfig, _fill_uniform

__all__ = ["DenoiserConfig", "Modulation", "AdaLNMambaBlock", "FinalLayer", "Denoiser"]


@dataclass
class DenoiserConfig:
    """Denoiser hyperparameters.

    d_hidden defaults to the reference model width (1280); the shipped
    desk-scale config overrides it to 256. gesture_channels counts joint
    expmap channels plus the 6 root velocity channels.
    """

    gesture_channels: int
    num_blocks: int = 3
    d_hidden: int = 1280
    d_state: int = 256
    conv_width: int = 4
    expand: int = 2
    variant: str = "mamba2"
    chunk_len: int = 32
    head_dim: int = 64
    encoder_kernel: int = 3
    use_gate: bool = True

    def __post_init__(self) -> None:
        if self.num_blocks < 1:
            raise ValueError("num_blocks must be >= 1")
        if self.gesture_channels < 1:
            raise ValueError("gesture_channels must be >= 1")
        if self.encoder_kernel not in (1, 3):
            raise ValueError("encoder_kernel must be 1 or 3")
        self.block_cfg()  # validates divisibility etc.

    def block_cfg(self) -> MambaBlockConfig:
        return MambaBlockConfig(
            d_model=self.d_hidden, d_state=self.d_state, conv_width=self.conv_width,
            expand=self.expand, variant=self.variant, chunk_len=self.chunk_len,
            head_dim=self.head_dim,
        )


@dataclass
class Modulation:
    """Per-token AdaLN coefficients, each (..., T, d_hidden)."""

    gamma: Tensor
    beta: Tensor
    gate: Tensor


def _check_pair(z: Tensor, c: Tensor, d_hidden: int) -> None:
    if z.shape[-1] != d_hidden or c.shape[-1] != d_hidden:
        raise ShapeError(f"latent width must be {d_hidden}")
    if z.shape != c.shape:
        raise ShapeError(f"z shape {tuple(z.shape)} != condition shape {tuple(c.shape)}")


class AdaLNMambaBlock(nn.Module):
    """Residual Mamba block with per-token scale/shift/gate from the condition."""

    def __init__(self, cfg: DenoiserConfig, rng: np.random.Generator | None = None,
                 seed: int = 0):
        super().__init__()
        gen = rng if rng is not None else rngmod.stream(seed, "adaln-block")
        self.d_hidden = cfg.d_hidden
        self.use_gate = cfg.use_gate
        self.norm = nn.LayerNorm(cfg.d_hidden, elementwise_affine=False)
        self.mamba = MambaBlock(cfg.block_cfg(), rng=gen)
        n_terms = 3 if cfg.use_gate else 2
        self.mod_proj = nn.Linear(cfg.d_hidden, n_terms * cfg.d_hidden)
        with torch.no_grad():
            self.mod_proj.weight.zero_()
            self.mod_proj.bias.zero_()

    def modulate(self, c: Tensor) -> Modulation:
        """Affine map of the condition into (gamma, beta, gate)."""
        parts = self.mod_proj(c).chunk(3 if self.use_gate else 2, dim=-1)
        gate = parts[2] if self.use_gate else torch.ones_like(parts[0])
        return Modulation(gamma=parts[0], beta=parts[1], gate=gate)

    def with_modulation(self, z: Tensor, mod: Modulation) -> Tensor:
        return z + mod.gate * self.mamba(self.norm(z) * (1 + mod.gamma) + mod.beta)

    def forward(self, z: Tensor, c: Tensor) -> Tensor:
        _check_pair(z, c, self.d_hidden)
        return self.with_modulation(z, self.modulate(c))


class FinalLayer(nn.Module):
    """LN-scale-shift readout layer; no gate, no Mamba, separate weights."""

    def __init__(self, d_hidden: int, rng: np.random.Generator | None = None,
                 seed: int = 0):
        super().__init__()
        self.d_hidden = d_hidden
        self.norm = nn.LayerNorm(d_hidden, elementwise_affine=False)
        self.mod_proj = nn.Linear(d_hidden, 2 * d_hidden)
        with torch.no_grad():
            self.mod_proj.weight.zero_()
            self.mod_proj.bias.zero_()

    def forward(self, z: Tensor, c: Tensor) -> Tensor:
        _check_pair(z, c, self.d_hidden)
        gamma_f, beta_f = self.mod_proj(c).chunk(2, dim=-1)
        return self.norm(z) * (1 + gamma_f) + beta_f


class Denoiser(nn.Module):
    """epsilon_theta(g_n, c) -> predicted noise, same shape as g_n."""

    def __init__(self, cfg: DenoiserConfig, rng: np.random.Generator | None = None,
                 seed: int = 0):
        super().__init__()
        gen = rng if rng is not None else rngmod.stream(seed, "denoiser")
        self.cfg = cfg
        k = cfg.encoder_kernel
        self.encode_conv = nn.Conv1d(cfg.gesture_channels, cfg.d_hidden, k,
                                     padding=k // 2, padding_mode="replicate")
        self.blocks = nn.ModuleList(
            AdaLNMambaBlock(cfg, rng=gen) for _ in range(cfg.num_blocks)
        )
        self.final = FinalLayer(cfg.d_hidden, rng=gen)
        self.decode_conv = nn.Conv1d(cfg.d_hidden, cfg.gesture_channels, 1)
        _fill_uniform(self.encode_conv.weight, 1.0 / math.sqrt(cfg.gesture_channels * k), gen)
        _fill_uniform(self.encode_conv.bias, 1.0 / math.sqrt(cfg.gesture_channels * k), gen)
        _fill_uniform(self.decode_conv.weight, 1.0 / math.sqrt(cfg.d_hidden), gen)
        _fill_uniform(self.decode_conv.bias, 1.0 / math.sqrt(cfg.d_hidden), gen)

    def _conv_over_time(self, conv: nn.Conv1d, x: Tensor) -> Tensor:
        squeeze = x.dim() == 2
        if squeeze:
            x = x[None]
        out = conv(x.transpose(1, 2)).transpose(1, 2)
        return out[0] if squeeze else out

    def gesture_encode(self, g: Tensor) -> Tensor:
        if g.shape[-1] != self.cfg.gesture_channels:
            raise ShapeError(
                f"expected {self.cfg.gesture_channels} gesture channels, got {g.shape[-1]}"
            )
        return self._conv_over_time(self.encode_conv, g)

    def gesture_decode(self, h: Tensor) -> Tensor:
        if h.shape[-1] != self.cfg.d_hidden:
            raise ShapeError(f"expected {self.cfg.d_hidden} latent channels, got {h.shape[-1]}")
        return self._conv_over_time(self.decode_conv, h)

    def forward(self, g_n: Tensor, c: Tensor) -> Tensor:
        z = self.gesture_encode(g_n)
        for block in self.blocks:
            z = block(z, c)
        z = self.final(z, c)
        return self.gesture_decode(z)
