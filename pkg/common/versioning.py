"""Utilities and constants for project-wide versioning."""

from __future__ import annotations

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path
from typing import Any, Final, Mapping

_ROOT_DIR: Final[Path] = Path(__file__).resolve().parent.parent
_PYPROJECT_PATH: Final[Path] = _ROOT_DIR / "pyproject.toml"

# Cache for lazy-loaded config
_PYPROJECT_CONFIG: Mapping[str, Any] | None = None


def _get_pyproject_config() -> Mapping[str, Any]:
    """Lazy load pyproject configuration."""
    global _PYPROJECT_CONFIG
    if _PYPROJECT_CONFIG is None:
        if not _PYPROJECT_PATH.exists():
            raise FileNotFoundError(f"pyproject.toml not found at {_PYPROJECT_PATH}")
        with _PYPROJECT_PATH.open("rb") as fp:
            _PYPROJECT_CONFIG = tomllib.load(fp)
    return _PYPROJECT_CONFIG


def _get_tool_config(section: str) -> Mapping[str, Any]:
    tool = _get_pyproject_config().get("tool", {})
    return tool.get("psslab", {}).get(section, {})


def get_version_config() -> Mapping[str, Any]:
    """Return raw version configuration as mapping."""
    return _get_tool_config("versions")


def get_project_version() -> str:
    """Return the semantic version `<major>.<minor>.<patch>` of the lab."""
    config = get_version_config()
    major = int(config.get("project_major", 0))
    minor = int(config.get("project_minor", 0))
    patch = int(config.get("patch", 0))
    if patch < 0:
        raise ValueError("Patch version must be non-negative")
    return f"{major}.{minor}.{patch}"


def get_report_schema_version() -> str:
    """Return the schema version stamped into every report and manifest.

    Bump the major part whenever a field is removed or changes meaning.
    """
    version = _get_tool_config("report").get("schema_version", "0.0")
    return str(version)


def get_report_schema_tuple() -> tuple[int, int]:
    """Return the report schema version as pair (major, minor)."""
    major_str, _, minor_str = get_report_schema_version().partition(".")
    try:
        return int(major_str), int(minor_str or 0)
    except ValueError:
        return 0, 0


__all__ = [
    "get_project_version",
    "get_report_schema_tuple",
    "get_report_schema_version",
    "get_version_config",
]
