"""Selective state-space scan kernels and the Mamba block.

Two kernels compute the same recurrence:

    h_t = exp(delta_t * A) (.) h_{t-1} + (delta_t * B_t) x_t
    y_t = C_t . h_t + d_skip (.) x_t

``selective_scan_sequential`` is the straightforward per-step evaluation and
serves as the ground-truth oracle. ``ssd_scan_chunked`` is the linear-time
formulation used in production paths: dense pairwise computation inside each
chunk, a single carried state between chunks. The chunked form requires A to
be a scalar per channel (state-space duality restriction); the sequential
kernel also accepts a full per-channel, per-state A matrix.

The state matrix is parameterized as A = -exp(a_log) so that decay factors
stay in (0, 1] for any real a_log.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import torch
import torch.nn.functional as F
from torch import Tensor, nn

from . import rng as rngmod
from .errors import NumericError, ShapeError

__all__ = [
    "ScanParams",
    "ScanState",
    "MambaBlockConfig",
    "MambaBlock",
    "selective_scan_sequential",
    "ssd_scan_chunked",
    "last_state_readout",
]


@dataclass
class ScanParams:
    """Input-dependent parameters for one scan over a length-T sequence.

    Fields:
        delta: (T, d_inner) positive step sizes.
        a_log: (d_inner,) scalar-per-channel log-magnitudes, or
            (d_inner, d_state) full per-state matrix (sequential kernel only).
        b_in: (T, d_state) input projections.
        c_out: (T, d_state) output projections.
        d_skip: (d_inner,) skip coefficients.
    """

    delta: Tensor
    a_log: Tensor
    b_in: Tensor
    c_out: Tensor
    d_skip: Tensor

    def __post_init__(self) -> None:
        t_len, d_inner = self.delta.shape
        if self.b_in.shape[0] != t_len or self.c_out.shape[0] != t_len:
            raise ShapeError(
                f"sequence-indexed fields disagree on T: delta has {t_len}, "
                f"b_in has {self.b_in.shape[0]}, c_out has {self.c_out.shape[0]}"
            )
        if self.b_in.shape[1] != self.c_out.shape[1]:
            raise ShapeError("b_in and c_out disagree on d_state")
        if self.d_skip.shape != (d_inner,):
            raise ShapeError(f"d_skip must have shape ({d_inner},)")
        if self.a_log.shape[0] != d_inner:
            raise ShapeError(f"a_log leading dim must be d_inner={d_inner}")
        if self.a_log.dim() == 2 and self.a_log.shape[1] != self.b_in.shape[1]:
            raise ShapeError("a_log trailing dim must equal d_state")
        if not torch.isfinite(self.delta).all() or not (self.delta > 0).all():
            raise NumericError("delta must be finite and strictly positive")

    @property
    def scalar_a(self) -> bool:
        return self.a_log.dim() == 1


@dataclass
class ScanState:
    """Running state h carried by a scan, shape (d_inner, d_state)."""

    h: Tensor

    def __post_init__(self) -> None:
        if not torch.isfinite(self.h).all():
            raise NumericError("scan state contains non-finite entries")


def _check_input(x: Tensor, p: ScanParams) -> None:
    if x.shape != p.delta.shape:
        raise ShapeError(f"x shape {tuple(x.shape)} != delta shape {tuple(p.delta.shape)}")
    if not torch.isfinite(x).all():
        raise NumericError("scan input contains non-finite values")


def _a_matrix(p: ScanParams) -> Tensor:
    a = -torch.exp(p.a_log)
    return a if a.dim() == 2 else a[:, None]  # broadcast over d_state


def _scan_sequential(x: Tensor, delta: Tensor, a: Tensor, b_in: Tensor,
                     c_out: Tensor, d_skip: Tensor) -> tuple[Tensor, Tensor]:
    """Batched reference scan. x, delta: (B, T, E); a: (E, N) or (E, 1)."""
    n_batch, t_len, d_inner = x.shape
    d_state = b_in.shape[-1]
    h = x.new_zeros(n_batch, d_inner, d_state)
    u = delta * x
    ys = []
    for t in range(t_len):
        decay = torch.exp(delta[:, t, :, None] * a)
        h = decay * h + u[:, t, :, None] * b_in[:, t, None, :]
        ys.append(torch.einsum("ben,bn->be", h, c_out[:, t]))
    y = torch.stack(ys, dim=1) + d_skip * x
    return y, h


def _scan_chunked(x: Tensor, delta: Tensor, a: Tensor, b_in: Tensor,
                  c_out: Tensor, d_skip: Tensor, chunk_len: int) -> tuple[Tensor, Tensor]:
    """Batched chunked scan. a: (E,) scalar log-decay rates (negative)."""
    n_batch, t_len, d_inner = x.shape
    d_state = b_in.shape[-1]
    h = x.new_zeros(n_batch, d_inner, d_state)
    u = delta * x
    log_decay = delta * a  # (B, T, E), all <= 0 for a < 0
    chunks = []
    for s in range(0, t_len, chunk_len):
        e = min(s + chunk_len, t_len)
        q = e - s
        cs = torch.cumsum(log_decay[:, s:e], dim=1)  # inclusive cumulative log-decay
        bq, cq, uq = b_in[:, s:e], c_out[:, s:e], u[:, s:e]
        # contribution of the state entering this chunk
        y_inter = torch.exp(cs) * torch.einsum("bqn,ben->bqe", cq, h)
        # dense intra-chunk term: decay from step j to step t, j <= t
        rel = cs[:, :, None, :] - cs[:, None, :, :]  # (B, q, q, E)
        causal = torch.ones(q, q, dtype=torch.bool, device=x.device).tril()
        decay = torch.exp(rel.masked_fill(~causal[None, :, :, None], float("-inf")))
        g = torch.einsum("bqn,bjn->bqj", cq, bq)
        y_intra = torch.einsum("bqj,bqje,bje->bqe", g, decay, uq)
        chunks.append(y_inter + y_intra)
        # carry state to the next chunk
        tail = torch.exp(cs[:, -1:, :] - cs)  # decay from each j to chunk end
        h = torch.exp(cs[:, -1])[:, :, None] * h + torch.einsum("bqe,bqn->ben", tail * uq, bq)
    y = torch.cat(chunks, dim=1) + d_skip * x
    return y, h


def selective_scan_sequential(x: Tensor, p: ScanParams) -> tuple[Tensor, ScanState]:
    """Step-by-step selective scan; the oracle kernel.

    Args:
        x: (T, d_inner) input sequence.
        p: scan parameters.

    Returns:
        (y, last_state) with y: (T, d_inner).
    """
    _check_input(x, p)
    y, h = _scan_sequential(
        x[None], p.delta[None], _a_matrix(p), p.b_in[None], p.c_out[None], p.d_skip
    )
    return y[0], ScanState(h[0])


def ssd_scan_chunked(x: Tensor, p: ScanParams, chunk_len: int) -> tuple[Tensor, ScanState]:
    """Chunked state-space-dual scan, numerically equivalent to the sequential
    kernel when a_log is scalar per channel.

    Args:
        x: (T, d_inner) input sequence.
        p: scan parameters with 1-D a_log.
        chunk_len: dense-block length >= 1; T need not divide evenly.
    """
    if chunk_len < 1:
        raise ValueError(f"chunk_len must be >= 1, got {chunk_len}")
    if not p.scalar_a:
        raise ShapeError("chunked scan requires scalar-per-channel a_log (1-D)")
    _check_input(x, p)
    y, h = _scan_chunked(
        x[None], p.delta[None], -torch.exp(p.a_log), p.b_in[None], p.c_out[None],
        p.d_skip, chunk_len,
    )
    return y[0], ScanState(h[0])


@dataclass
class MambaBlockConfig:
    """Hyperparameters for one Mamba block.

    d_state 256, conv_width 4 and expand 2 are the reference model settings;
    head_dim and chunk_len only apply to the mamba2 variant, dt_rank only to
    mamba1 (defaults to ceil(d_model / 16)).
    """

    d_model: int
    d_state: int = 256
    conv_width: int = 4
    expand: int = 2
    variant: str = "mamba2"
    chunk_len: int = 32
    head_dim: int = 64
    dt_rank: int | None = None
    dt_min: float = 1e-3
    dt_max: float = 1e-1

    def __post_init__(self) -> None:
        if self.variant not in ("mamba1", "mamba2"):
            raise ValueError(f"unknown variant {self.variant!r}")
        if min(self.d_model, self.d_state, self.conv_width, self.expand, self.chunk_len) < 1:
            raise ValueError("all block dimensions must be positive")
        if self.variant == "mamba2" and self.d_inner % self.head_dim != 0:
            raise ValueError(
                f"d_inner={self.d_inner} not divisible by head_dim={self.head_dim}"
            )
        if not 0 < self.dt_min < self.dt_max:
            raise ValueError("require 0 < dt_min < dt_max")

    @property
    def d_inner(self) -> int:
        return self.expand * self.d_model

    @property
    def n_heads(self) -> int:
        return self.d_inner // self.head_dim

    @property
    def rank(self) -> int:
        return self.dt_rank if self.dt_rank is not None else math.ceil(self.d_model / 16)


def _fill_uniform(param: Tensor, bound: float, gen: np.random.Generator) -> None:
    vals = gen.uniform(-bound, bound, size=tuple(param.shape))
    with torch.no_grad():
        param.copy_(torch.from_numpy(vals).to(param.dtype))


class MambaBlock(nn.Module):
    """Gated Mamba block: in_proj -> causal depthwise conv -> SiLU ->
    selective scan -> gated multiply -> out_proj. Variant picks the kernel."""

    def __init__(self, cfg: MambaBlockConfig, rng: np.random.Generator | None = None,
                 seed: int = 0):
        super().__init__()
        self.cfg = cfg
        d_inner = cfg.d_inner
        self.in_proj = nn.Linear(cfg.d_model, 2 * d_inner, bias=False)
        self.conv = nn.Conv1d(d_inner, d_inner, cfg.conv_width, groups=d_inner, bias=True)
        if cfg.variant == "mamba2":
            self.param_proj = nn.Linear(d_inner, cfg.n_heads + 2 * cfg.d_state, bias=False)
            self.dt_bias = nn.Parameter(torch.empty(cfg.n_heads))
            self.a_log = nn.Parameter(torch.empty(cfg.n_heads))
        else:
            self.param_proj = nn.Linear(d_inner, cfg.rank + 2 * cfg.d_state, bias=False)
            self.dt_proj = nn.Linear(cfg.rank, d_inner, bias=False)
            self.dt_bias = nn.Parameter(torch.empty(d_inner))
            self.a_log = nn.Parameter(torch.empty(d_inner, cfg.d_state))
        self.d_skip = nn.Parameter(torch.ones(d_inner))
        self.out_proj = nn.Linear(d_inner, cfg.d_model, bias=False)
        self.reset_parameters(rng if rng is not None else rngmod.stream(seed, "mamba-block"))

    def reset_parameters(self, gen: np.random.Generator) -> None:
        cfg = self.cfg
        _fill_uniform(self.in_proj.weight, 1.0 / math.sqrt(cfg.d_model), gen)
        _fill_uniform(self.conv.weight, 1.0 / math.sqrt(cfg.conv_width), gen)
        _fill_uniform(self.conv.bias, 1.0 / math.sqrt(cfg.conv_width), gen)
        _fill_uniform(self.param_proj.weight, 1.0 / math.sqrt(cfg.d_inner), gen)
        with torch.no_grad():
            # rows sum to zero so a constant input offset (the log floor of
            # quiet audio, reaching this block unnormalized) cannot excite
            # the scan; the gated bilinear path diverges under such offsets
            self.in_proj.weight -= self.in_proj.weight.mean(dim=1, keepdim=True)
            self.param_proj.weight -= self.param_proj.weight.mean(dim=1, keepdim=True)
        # bias chosen so initial delta = softplus(bias) lands in [dt_min, dt_max]
        dt = np.exp(gen.uniform(math.log(cfg.dt_min), math.log(cfg.dt_max),
                                size=tuple(self.dt_bias.shape)))
        inv = dt + np.log(-np.expm1(-dt))
        with torch.no_grad():
            self.dt_bias.copy_(torch.from_numpy(inv).to(self.dt_bias.dtype))
            if cfg.variant == "mamba2":
                a0 = gen.uniform(1.0, 16.0, size=(cfg.n_heads,))
                self.a_log.copy_(torch.from_numpy(np.log(a0)).to(self.a_log.dtype))
            else:
                row = torch.log(torch.arange(1, cfg.d_state + 1, dtype=torch.float64))
                self.a_log.copy_(row.expand(cfg.d_inner, -1).to(self.a_log.dtype))
            self.d_skip.fill_(1.0)
        if cfg.variant == "mamba1":
            _fill_uniform(self.dt_proj.weight, 1.0 / math.sqrt(cfg.rank), gen)
        _fill_uniform(self.out_proj.weight, 1.0 / math.sqrt(cfg.d_inner), gen)

    def _scan(self, v: Tensor) -> Tensor:
        """Run the variant's kernel. v: (B, T, d_inner) post-conv activations."""
        cfg = self.cfg
        proj = self.param_proj(v)
        if cfg.variant == "mamba2":
            dt_head = F.softplus(proj[..., : cfg.n_heads] + self.dt_bias)
            delta = dt_head.repeat_interleave(cfg.head_dim, dim=-1)
            b_in = proj[..., cfg.n_heads : cfg.n_heads + cfg.d_state]
            c_out = proj[..., cfg.n_heads + cfg.d_state :]
            a = -torch.exp(self.a_log).repeat_interleave(cfg.head_dim)
            y, _ = _scan_chunked(v, delta, a, b_in, c_out, self.d_skip, cfg.chunk_len)
        else:
            delta = F.softplus(self.dt_proj(proj[..., : cfg.rank]) + self.dt_bias)
            b_in = proj[..., cfg.rank : cfg.rank + cfg.d_state]
            c_out = proj[..., cfg.rank + cfg.d_state :]
            y, _ = _scan_sequential(v, delta, -torch.exp(self.a_log), b_in, c_out, self.d_skip)
        return y

    def forward(self, u: Tensor) -> Tensor:
        if u.shape[-1] != self.cfg.d_model:
            raise ShapeError(
                f"expected {self.cfg.d_model} input channels, got {u.shape[-1]}"
            )
        squeeze = u.dim() == 2
        if squeeze:
            u = u[None]
        val, gate = self.in_proj(u).chunk(2, dim=-1)
        v = F.pad(val.transpose(1, 2), (self.cfg.conv_width - 1, 0))
        v = F.silu(self.conv(v).transpose(1, 2))
        y = self._scan(v) * F.silu(gate)
        out = self.out_proj(y)
        return out[0] if squeeze else out


def last_state_readout(block: MambaBlock, u: Tensor) -> Tensor:
    """Final-token output of a Mamba block, shape (1, d_model)."""
    if u.dim() != 2 or u.shape[0] < 1:
        raise ShapeError("readout requires a nonempty (T, d_model) sequence")
    return block(u)[-1:]
