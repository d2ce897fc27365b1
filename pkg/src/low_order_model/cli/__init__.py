"""Command-line interface for the low-order model."""

from .main import main

__all__ = ["main"]
