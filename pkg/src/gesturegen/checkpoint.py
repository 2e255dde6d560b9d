"""Checkpoint serialization.

A checkpoint is a single torch.save file restricted to tensors and plain
Python containers so it always loads under ``weights_only=True``. It carries
everything needed to resume training exactly (model, optimizer, RNG stream
states, schedule) plus whatever the caller stores under ``extra`` (configs,
standardization stats, skeleton).
"""

from __future__ import annotations

from dataclasses import asdict
from pathlib import Path

import numpy as np
import torch

from . import rng as rngmod

__all__ = ["save_checkpoint", "load_checkpoint", "restore_streams"]


def save_checkpoint(path, *, step: int, model, optimizer, streams: dict,
                    sched, train_cfg, extra: dict | None = None) -> Path:
    payload = {
        "step": int(step),
        "model": model.state_dict(),
        "optimizer": optimizer.state_dict(),
        "rng": {name: rngmod.state_to_jsonable(gen) for name, gen in streams.items()},
        "schedule_beta": torch.from_numpy(np.ascontiguousarray(sched.beta)),
        "train_config": asdict(train_cfg),
        "extra": extra or {},
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    torch.save(payload, path)
    return path


def load_checkpoint(path) -> dict:
    return torch.load(Path(path), weights_only=True)


def restore_streams(payload: dict) -> dict:
    """Rebuild the named RNG streams stored in a checkpoint."""
    return {name: rngmod.state_from_jsonable(state)
            for name, state in payload["rng"].items()}
