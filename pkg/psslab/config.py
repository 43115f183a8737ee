"""Configuration management that reads exclusively from `common/config/settings.toml`."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from typing import Any


CONFIG_PATH = Path(__file__).resolve().parent.parent / "common" / "config" / "settings.toml"

_IDLE_RULES = ("fastest", "lowest_index")
_FORMATS = ("csv", "json")


class SettingsError(RuntimeError):
    """Raised when configuration cannot be loaded."""


def _load_config_file(path: Path) -> dict[str, Any]:
    """Load TOML configuration from disk."""
    if not path.exists():
        raise SettingsError(
            f"Configuration file '{path}' is missing. "
            "Restore 'common/config/settings.toml' from the repository before running the lab."
        )
    with path.open("rb") as fp:
        return tomllib.load(fp)


def _require_section(raw: dict[str, Any], section: str, path: Path) -> dict[str, Any]:
    if section not in raw or not isinstance(raw[section], dict):
        raise SettingsError(
            f"Section '[{section}]' is missing in '{path}'. "
            "All settings must be defined in the config file."
        )
    return raw[section]


def _require_value(section: dict[str, Any], key: str, *, section_name: str, path: Path) -> Any:
    if key not in section:
        raise SettingsError(
            f"Missing key '{section_name}.{key}' in '{path}'. "
            "Only the seed may be overridden from the environment (PSSLAB_SEED)."
        )
    return section[key]


def _extract_settings(raw: dict[str, Any], path: Path) -> dict[str, Any]:
    """Map nested TOML structure into flat settings attributes."""
    lp = _require_section(raw, "lp", path)
    simulation = _require_section(raw, "simulation", path)
    lab = _require_section(raw, "lab", path)
    logging_section = _require_section(raw, "logging", path)
    cli = _require_section(raw, "cli", path)

    def req(section: dict[str, Any], key: str, name: str) -> Any:
        return _require_value(section, key, section_name=name, path=path)

    idle_rule = req(simulation, "arch2_idle_rule", "simulation")
    if idle_rule not in _IDLE_RULES:
        raise SettingsError(f"simulation.arch2_idle_rule must be one of {_IDLE_RULES}, got {idle_rule!r}")
    default_format = req(cli, "default_format", "cli")
    if default_format not in _FORMATS:
        raise SettingsError(f"cli.default_format must be one of {_FORMATS}, got {default_format!r}")

    return {
        "classify_tolerance": float(req(lp, "classify_tolerance", "lp")),
        "residual_tolerance": float(req(lp, "residual_tolerance", "lp")),
        "max_iterations": int(req(lp, "max_iterations", "lp")),
        "warmup_fraction": float(req(simulation, "warmup_fraction", "simulation")),
        "reservoir_capacity": int(req(simulation, "reservoir_capacity", "simulation")),
        "random_block": int(req(simulation, "random_block", "simulation")),
        "arch2_idle_rule": idle_rule,
        "confidence": float(req(lab, "confidence", "lab")),
        "r_values": [float(r) for r in req(lab, "r_values", "lab")],
        "base_horizon": float(req(lab, "base_horizon", "lab")),
        "replications": int(req(lab, "replications", "lab")),
        "divergence_slope": float(req(lab, "divergence_slope", "lab")),
        "divergence_r2": float(req(lab, "divergence_r2", "lab")),
        "stable_relative_change": float(req(lab, "stable_relative_change", "lab")),
        "probe_doublings": int(req(lab, "probe_doublings", "lab")),
        "log_level": str(req(logging_section, "level", "logging")).upper(),
        "log_dir": str(req(logging_section, "log_dir", "logging")),
        "default_seed": int(req(cli, "default_seed", "cli")),
        "default_format": default_format,
        "default_jobs": int(req(cli, "default_jobs", "cli")),
    }


@dataclass(slots=True)
class Settings:
    """Lab settings loaded from the config file."""

    classify_tolerance: float
    residual_tolerance: float
    max_iterations: int
    warmup_fraction: float
    reservoir_capacity: int
    random_block: int
    arch2_idle_rule: str
    confidence: float
    r_values: list[float]
    base_horizon: float
    replications: int
    divergence_slope: float
    divergence_r2: float
    stable_relative_change: float
    probe_doublings: int
    log_level: str
    log_dir: str
    default_seed: int
    default_format: str
    default_jobs: int

    @property
    def debug(self) -> bool:
        """True when the configured log level is DEBUG."""
        return self.log_level == "DEBUG"


_settings: Settings | None = None


def load_settings(path: Path) -> Settings:
    """Load settings from an explicit path (no caching)."""
    raw = _load_config_file(path)
    return Settings(**_extract_settings(raw, path))


def get_settings() -> Settings:
    """Get lab settings (singleton pattern)."""
    global _settings
    if _settings is None:
        _settings = load_settings(CONFIG_PATH)
    return _settings
