"""Full speech-to-gesture model: condition extractor plus denoiser.

The two halves share only the hidden width D''. The extractor turns audio
features into the per-frame latent z_l once per clip; the denoiser is then
queried many times with different diffusion steps, each of which shifts z_l
through the step embedding before denoising.
"""

from __future__ import annotations

import torch
from torch import Tensor, nn

from .condition import ConditionExtractor, ExtractorConfig
from .denoiser import Denoiser, DenoiserConfig
from .errors import ConfigError

__all__ = ["GestureModel"]


class GestureModel(nn.Module):
    """Pairs a ConditionExtractor with a Denoiser over a shared width."""

    def __init__(self, extractor_cfg: ExtractorConfig, denoiser_cfg: DenoiserConfig,
                 seed: int = 0):
        super().__init__()
        if extractor_cfg.d_hidden != denoiser_cfg.d_hidden:
            raise ConfigError(
                f"extractor width {extractor_cfg.d_hidden} must match denoiser "
                f"width {denoiser_cfg.d_hidden}"
            )
        self.extractor = ConditionExtractor(extractor_cfg, seed=seed)
        self.denoiser = Denoiser(denoiser_cfg, seed=seed)

    @property
    def gesture_channels(self) -> int:
        return self.denoiser.cfg.gesture_channels

    @property
    def target_fps(self) -> int:
        return self.extractor.cfg.target_fps

    def condition_stack(self, z_a: Tensor, feature_rate_hz: float | None = None) -> Tensor:
        """Audio features to the per-frame latent z_l (step-independent)."""
        return self.extractor.unified_latent(z_a, feature_rate_hz)

    def denoise(self, g_n: Tensor, z_l: Tensor, n, n_total: int | None = None) -> Tensor:
        """Predicts the noise in g_n given the latent and diffusion step n."""
        cond = self.extractor.build_condition(z_l, n, n_total)
        return self.denoiser(g_n, cond)

    def parameter_count(self) -> int:
        return sum(p.numel() for p in self.parameters())
