"""HTTP service layer: FastAPI app factory plus request/response schemas."""

from .app import create_app

__all__ = ["create_app"]
