"""Run configuration: flat key=value files, environment overrides, flags.

Precedence, highest first: command-line flags, then TEMPORALEX_<KEY>
environment variables, then the config file (path given by --config or
the TEMPORALEX_CONFIG variable), then built-in defaults.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Optional

from .agent import RolloutLimits
from .grpo import ShapingConfig
from .retrieval import RetrievalConfig
from .tools import SEARCH_API_KEY_VAR

CONFIG_PATH_VAR = "TEMPORALEX_CONFIG"
ENV_PREFIX = "TEMPORALEX_"

MODE_FIXTURE = "fixture"
MODE_LIVE = "live"


class ConfigError(ValueError):
    """Bad config file syntax, unknown keys, or unusable values."""


def parse_config_file(path: str | Path) -> dict[str, str]:
    """Parse a flat ``key = value`` file; '#' starts a comment."""
    values: dict[str, str] = {}
    for line_no, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"{path}, line {line_no}: expected 'key = value'")
        key, _, value = stripped.partition("=")
        values[key.strip()] = value.strip()
    return values


@dataclass
class RunConfig:
    """Everything a run needs: corpus location, retrieval and rollout knobs,
    tool mode, and fixture paths."""

    corpus: Optional[str] = None
    index_dir: Optional[str] = None
    tool_mode: str = MODE_FIXTURE
    search_fixture: Optional[str] = None
    pages_fixture: Optional[str] = None
    search_endpoint: Optional[str] = None
    output_dir: str = "runs"
    workers: int = 4
    retrieval: RetrievalConfig = field(default_factory=RetrievalConfig)
    limits: RolloutLimits = field(default_factory=RolloutLimits)
    shaping: ShapingConfig = field(default_factory=ShapingConfig)

    def __post_init__(self) -> None:
        if self.tool_mode not in (MODE_FIXTURE, MODE_LIVE):
            raise ConfigError(f"tool_mode must be '{MODE_FIXTURE}' or '{MODE_LIVE}'")
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")

    def require_live_key(self) -> None:
        if self.tool_mode == MODE_LIVE and not os.environ.get(SEARCH_API_KEY_VAR):
            raise ConfigError(f"tool_mode 'live' requires {SEARCH_API_KEY_VAR} to be set")


_RUN_KEYS = {
    "corpus": str,
    "index_dir": str,
    "tool_mode": str,
    "search_fixture": str,
    "pages_fixture": str,
    "search_endpoint": str,
    "output_dir": str,
    "workers": int,
}
_RETRIEVAL_KEYS = {f.name: f.type for f in fields(RetrievalConfig)}
_LIMIT_KEYS = {f.name: f.type for f in fields(RolloutLimits)}
_SHAPING_KEYS = {f.name: f.type for f in fields(ShapingConfig)}


def _coerce(key: str, raw: str, kind: object) -> object:
    kind_name = kind if isinstance(kind, str) else getattr(kind, "__name__", str(kind))
    try:
        if kind is int or kind_name == "int":
            return int(raw)
        if kind is float or kind_name == "float":
            return float(raw)
        if kind is bool or kind_name == "bool":
            lowered = raw.strip().casefold()
            if lowered in ("1", "true", "yes", "on"):
                return True
            if lowered in ("0", "false", "no", "off"):
                return False
            raise ValueError(f"not a boolean: {raw!r}")
    except ValueError as exc:
        raise ConfigError(f"config key '{key}': {exc}") from None
    return raw


def load_run_config(
    config_path: Optional[str] = None,
    overrides: Optional[dict[str, object]] = None,
    environ: Optional[dict[str, str]] = None,
) -> RunConfig:
    """Layer defaults, file values, environment, and explicit overrides."""
    environ = os.environ if environ is None else environ
    path = config_path or environ.get(CONFIG_PATH_VAR)
    merged: dict[str, object] = {}

    def absorb(key: str, raw: object, coerce: bool) -> None:
        for table in (_RUN_KEYS, _RETRIEVAL_KEYS, _LIMIT_KEYS, _SHAPING_KEYS):
            if key in table:
                merged[key] = _coerce(key, raw, table[key]) if coerce else raw
                return
        raise ConfigError(f"unknown config key '{key}'")

    if path:
        if not Path(path).exists():
            raise ConfigError(f"config file not found: {path}")
        for key, raw in parse_config_file(path).items():
            absorb(key, raw, coerce=True)
    known = set(_RUN_KEYS) | set(_RETRIEVAL_KEYS) | set(_LIMIT_KEYS) | set(_SHAPING_KEYS)
    for env_key, raw in sorted(environ.items()):
        if not env_key.startswith(ENV_PREFIX) or env_key == CONFIG_PATH_VAR:
            continue
        key = env_key[len(ENV_PREFIX) :].casefold()
        if key in known:
            absorb(key, raw, coerce=True)
    for key, value in (overrides or {}).items():
        if value is not None:
            absorb(key, value, coerce=False)

    run_kwargs = {k: v for k, v in merged.items() if k in _RUN_KEYS}
    retrieval_kwargs = {k: v for k, v in merged.items() if k in _RETRIEVAL_KEYS}
    limit_kwargs = {k: v for k, v in merged.items() if k in _LIMIT_KEYS}
    shaping_kwargs = {k: v for k, v in merged.items() if k in _SHAPING_KEYS}
    try:
        return RunConfig(
            retrieval=RetrievalConfig(**retrieval_kwargs),
            limits=RolloutLimits(**limit_kwargs),
            shaping=ShapingConfig(**shaping_kwargs),
            **run_kwargs,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
