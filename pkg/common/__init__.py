"""Shared project utilities: versioning and bundled configuration."""

from __future__ import annotations

__all__: list[str] = []
