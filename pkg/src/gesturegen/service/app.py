"""HTTP service exposing the pipelines.

The CLI talks to this app (in-process by default), so every operator
action goes through one validated surface. Domain errors map to status
400 with {"error": <exception class>, "detail": <message>} bodies.
"""

from __future__ import annotations

import warnings

from fastapi import FastAPI
from fastapi.responses import JSONResponse

from .. import __version__
from ..bench import run_bench
from ..condition import check_dimf
from ..config import Config, load_config, parse_config
from ..data import prepare_corpus
from ..errors import ConfigError
from ..pipelines import evaluate_dirs, sample_to_bvh, train_from_config
from . import schemas


def _resolve_config(config: dict | None, config_path: str | None) -> Config:
    if config is not None and config_path is not None:
        raise ConfigError("pass either an inline config or config_path, not both")
    if config_path is not None:
        return load_config(config_path)
    if config is not None:
        return parse_config(config)
    return Config()


def create_app() -> FastAPI:
    app = FastAPI(title="gesturegen service", version=__version__)

    @app.exception_handler(ValueError)
    async def domain_error(request, exc: ValueError):
        return JSONResponse(status_code=400, content={
            "error": type(exc).__name__, "detail": str(exc)})

    @app.exception_handler(FileNotFoundError)
    async def missing_file(request, exc: FileNotFoundError):
        return JSONResponse(status_code=404, content={
            "error": "FileNotFoundError", "detail": str(exc)})

    @app.get("/health", response_model=schemas.HealthResponse)
    def health():
        return {"status": "ok", "version": __version__}

    @app.post("/prepare", response_model=schemas.PrepareResponse)
    def prepare(req: schemas.PrepareRequest):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")  # skips travel in the body
            report = prepare_corpus(req.bvh_dir, req.wav_dir, req.out_dir,
                                    fps=req.fps, sample_rate=req.sample_rate,
                                    clip_s=req.clip_s)
        return {"clips": len(report.rows),
                "manifest_path": str(report.manifest_path),
                "skipped": report.skipped}

    @app.post("/train", response_model=schemas.TrainResponse)
    def train_endpoint(req: schemas.TrainRequest):
        cfg = _resolve_config(req.config, req.config_path)
        result = train_from_config(cfg, req.data_dir, req.out_dir,
                                   resume_from=req.resume_from)
        return {"steps": result.step, "final_loss": result.losses[-1],
                "checkpoint_path": str(result.checkpoint_path),
                "csv_path": str(result.csv_path)}

    @app.post("/sample", response_model=schemas.SampleResponse)
    def sample_endpoint(req: schemas.SampleRequest):
        if req.wav is None and req.features is None:
            raise ConfigError("sample needs a wav or a features file")
        return sample_to_bvh(req.checkpoint, req.wav, req.out_path,
                             seed=req.seed, features_path=req.features,
                             langevin_noise=req.langevin_noise)

    @app.post("/eval", response_model=schemas.EvalResponse)
    def eval_endpoint(req: schemas.EvalRequest):
        cfg = _resolve_config(req.config, req.config_path)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")  # missing pairs drop from the mean
            return evaluate_dirs(req.real_dir, req.gen_dir, req.wav_dir,
                                 out_csv=req.out_csv, cfg=cfg)

    @app.post("/bench", response_model=schemas.BenchResponse)
    def bench_endpoint(req: schemas.BenchRequest):
        rows = run_bench(req.variant, lengths=tuple(req.lengths),
                         repeats=req.repeats, channels=req.channels,
                         d_hidden=req.d_hidden, sample_steps=req.sample_steps,
                         include_sampling=req.include_sampling, seed=req.seed,
                         out_csv=req.out_csv)
        return {"rows": [vars(row) for row in rows]}

    @app.post("/features/check", response_model=schemas.FeatureCheckResponse)
    def features_check(req: schemas.FeatureCheckRequest):
        return check_dimf(req.path)

    return app
