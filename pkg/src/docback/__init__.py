"""Readable, multi-page-consistent document backgrounds."""

__version__ = "0.1.0"
