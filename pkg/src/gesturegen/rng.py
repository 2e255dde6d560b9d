"""Deterministic random streams.

Every stochastic draw in the package (weight init, diffusion step indices,
noise, batch order) flows through a named counter-based Philox stream so that
a seed fully determines outputs and stream state can be checkpointed.
"""

from __future__ import annotations

import hashlib

import numpy as np

__all__ = ["stream", "state_to_jsonable", "state_from_jsonable"]


def _key(seed: int, name: str) -> int:
    """Derive a 128-bit Philox key from (seed, stream name)."""
    digest = hashlib.sha256(f"{seed}:{name}".encode()).digest()
    return int.from_bytes(digest[:16], "little")


def stream(seed: int, name: str) -> np.random.Generator:
    """Return the named Philox stream for a seed.

    Streams with different names are statistically independent; the same
    (seed, name) pair always yields the same sequence.
    """
    return np.random.Generator(np.random.Philox(key=_key(seed, name)))


def state_to_jsonable(gen: np.random.Generator) -> dict:
    """Serialize generator state to plain ints/lists (checkpoint-safe)."""
    state = gen.bit_generator.state
    return {
        "bit_generator": state["bit_generator"],
        "counter": [int(v) for v in state["state"]["counter"]],
        "key": [int(v) for v in state["state"]["key"]],
        "buffer": [int(v) for v in state["buffer"]],
        "buffer_pos": int(state["buffer_pos"]),
        "has_uint32": int(state["has_uint32"]),
        "uinteger": int(state["uinteger"]),
    }


def state_from_jsonable(payload: dict) -> np.random.Generator:
    """Rebuild a generator from :func:`state_to_jsonable` output."""
    bg = np.random.Philox()
    bg.state = {
        "bit_generator": payload["bit_generator"],
        "state": {
            "counter": np.array(payload["counter"], dtype=np.uint64),
            "key": np.array(payload["key"], dtype=np.uint64),
        },
        "buffer": np.array(payload["buffer"], dtype=np.uint64),
        "buffer_pos": payload["buffer_pos"],
        "has_uint32": payload["has_uint32"],
        "uinteger": payload["uinteger"],
    }
    return np.random.Generator(bg)
