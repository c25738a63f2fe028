"""HTTP service exposing the experiment pipeline and its closed-form helpers."""

from .app import create_app

__all__ = ["create_app"]
