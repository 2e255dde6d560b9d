"""Speech-driven gesture generation with a state-space diffusion model."""

__version__ = "0.1.0"
