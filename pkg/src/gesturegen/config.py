"""Run configuration.

One JSON document controls data preparation, model size, the diffusion
schedule, training, and evaluation. Unknown keys are rejected so a config
file fully determines a run, and config_hash() gives runs a stable
fingerprint for reports.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

from pydantic import BaseModel, ConfigDict, Field, ValidationError

from .condition import ExtractorConfig
from .denoiser import DenoiserConfig
from .diffusion import TrainConfig
from .errors import ConfigError


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class DataSection(_Section):
    fps: int = 20
    sample_rate: int = 16000
    clip_s: float = 20.0


class ModelSection(_Section):
    """Network sizes. The defaults are the desk-scale configuration; the
    reference-scale run uses d_hidden=1280, d_state=256, head_dim=64."""

    d_feature: int = 80
    d_hidden: int = 64
    num_blocks: int = 3
    d_state: int = 16
    head_dim: int = 16
    chunk_len: int = 32
    conv_width: int = 4
    expand: int = 2
    variant: str = "mamba2"
    encoder_kernel: int = 3
    use_gate: bool = True
    style: str = "mamba"
    style_d_state: int = 16
    style_head_dim: int = 8
    style_chunk_len: int = 32
    down_kernel: int = 201
    feature_rate_hz: int = 100


class DiffusionSection(_Section):
    n_steps: int = 1000
    beta_start: float = 1e-4
    beta_end: float = 8e-2


class TrainSection(_Section):
    batch_size: int = 8
    learning_rate: float = 1e-4
    max_steps: int = 200
    seed: int = 0
    checkpoint_every: int = 0


class MetricsSection(_Section):
    fgd_window: int = 40
    beat_sigma_s: float = 0.1
    encoder_dim: int = 32
    encoder_steps: int = 200
    encoder_seed: int = 0


class Config(_Section):
    data: DataSection = Field(default_factory=DataSection)
    model: ModelSection = Field(default_factory=ModelSection)
    diffusion: DiffusionSection = Field(default_factory=DiffusionSection)
    train: TrainSection = Field(default_factory=TrainSection)
    metrics: MetricsSection = Field(default_factory=MetricsSection)

    def extractor_config(self) -> ExtractorConfig:
        m = self.model
        return ExtractorConfig(
            d_feature=m.d_feature,
            d_hidden=m.d_hidden,
            feature_rate_hz=m.feature_rate_hz,
            target_fps=self.data.fps,
            style=m.style,
            style_d_state=m.style_d_state,
            style_head_dim=m.style_head_dim,
            style_chunk_len=m.style_chunk_len,
            style_conv_width=m.conv_width,
            style_expand=m.expand,
            down_kernel=m.down_kernel,
        )

    def denoiser_config(self, gesture_channels: int) -> DenoiserConfig:
        m = self.model
        return DenoiserConfig(
            gesture_channels=gesture_channels,
            num_blocks=m.num_blocks,
            d_hidden=m.d_hidden,
            d_state=m.d_state,
            conv_width=m.conv_width,
            expand=m.expand,
            variant=m.variant,
            chunk_len=m.chunk_len,
            head_dim=m.head_dim,
            encoder_kernel=m.encoder_kernel,
            use_gate=m.use_gate,
        )

    def train_config(self) -> TrainConfig:
        t = self.train
        return TrainConfig(
            batch_size=t.batch_size,
            learning_rate=t.learning_rate,
            max_steps=t.max_steps,
            seed=t.seed,
            checkpoint_every=t.checkpoint_every,
            feature_rate_hz=float(self.model.feature_rate_hz),
        )


def parse_config(raw: dict, source: str = "config") -> Config:
    try:
        return Config.model_validate(raw)
    except ValidationError as exc:
        first = exc.errors()[0]
        key = ".".join(str(part) for part in first["loc"])
        raise ConfigError(f"{source}: {key}: {first['msg']}") from exc


def load_config(path) -> Config:
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: config root must be a JSON object")
    return parse_config(raw, source=str(path))


def config_hash(cfg: Config) -> str:
    """First 12 hex chars of the sha256 of the canonical config JSON."""
    canonical = json.dumps(cfg.model_dump(), sort_keys=True,
                           separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()[:12]
