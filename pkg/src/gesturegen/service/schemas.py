"""Request and response bodies for the HTTP service.

Every body forbids unknown fields so client typos surface as validation
errors instead of silently ignored options.
"""

from __future__ import annotations

from pydantic import BaseModel, ConfigDict, Field


class _Body(BaseModel):
    model_config = ConfigDict(extra="forbid")


class HealthResponse(_Body):
    status: str
    version: str


class ErrorResponse(_Body):
    error: str
    detail: str


class PrepareRequest(_Body):
    bvh_dir: str
    wav_dir: str
    out_dir: str
    fps: int = 20
    sample_rate: int = 16000
    clip_s: float = 20.0


class PrepareResponse(_Body):
    clips: int
    manifest_path: str
    skipped: list[str]


class TrainRequest(_Body):
    data_dir: str
    out_dir: str
    config: dict | None = None  # inline config document
    config_path: str | None = None  # or a path the service can read
    resume_from: str | None = None


class TrainResponse(_Body):
    steps: int
    final_loss: float
    checkpoint_path: str
    csv_path: str


class SampleRequest(_Body):
    checkpoint: str
    out_path: str
    wav: str | None = None
    features: str | None = None  # DIMF file standing in for the wav
    seed: int = 0
    langevin_noise: bool = True


class SampleResponse(_Body):
    frames: int
    fps: int
    out_path: str
    resampled: bool
    checkpoint_step: int
    seed: int


class EvalRequest(_Body):
    real_dir: str
    gen_dir: str
    wav_dir: str | None = None
    out_csv: str | None = None
    config: dict | None = None
    config_path: str | None = None


class EvalResponse(_Body):
    fgd_raw: float
    fgd_feature: float
    beat_align: float | None
    n_real: int
    n_gen: int
    config_hash: str
    report_path: str | None = None


class BenchRequest(_Body):
    variant: str = "mamba2"
    lengths: list[int] = Field(default_factory=lambda: [200, 400, 800, 1600])
    repeats: int = 5
    channels: int = 12
    d_hidden: int = 64
    sample_steps: int = 10
    include_sampling: bool = True
    seed: int = 0
    out_csv: str | None = None


class BenchRowBody(_Body):
    variant: str
    length: int
    parameters: int
    forward_ms: float
    sample_ms: float | None = None


class BenchResponse(_Body):
    rows: list[BenchRowBody]


class FeatureCheckRequest(_Body):
    path: str


class FeatureCheckResponse(_Body):
    frames: int
    channels: int
    frame_rate_hz: float
