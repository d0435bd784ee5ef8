"""HTTP service wrapping the training, evaluation, and prediction pipeline."""

from .app import create_app

__all__ = ["create_app"]
