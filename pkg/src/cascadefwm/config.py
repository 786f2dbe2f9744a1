"""Flat key=value run configuration.

Config files are plain text: one ``key = value`` per line, ``#`` comments,
blank lines ignored.  Values parse as int, then float, then bool
(true/false), falling back to the bare string.  Command-line overrides win
over file values.  Commands validate their keys against an allowed set, so
misspellings fail fast instead of being silently ignored.
"""

from __future__ import annotations

import os
from typing import Iterable, Mapping

__all__ = ["ConfigError", "RunConfig", "parse_scalar"]

_MISSING = object()


class ConfigError(ValueError):
    """Bad configuration: unknown key, wrong type, or unparsable file."""


def parse_scalar(text: str):
    text = text.strip()
    for conv in (int, float):
        try:
            return conv(text)
        except ValueError:
            pass
    if text.lower() == "true":
        return True
    if text.lower() == "false":
        return False
    return text


class RunConfig:
    """Parsed configuration plus typed, validated access."""

    def __init__(self, values: Mapping[str, object] | None = None, source: str = "<none>"):
        self.values = dict(values or {})
        self.source = source

    @classmethod
    def from_file(cls, path: os.PathLike | str) -> "RunConfig":
        values: dict[str, object] = {}
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, raw in enumerate(fh, start=1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ConfigError(f"{path}: line {lineno}: expected 'key = value'")
                key, _, value = line.partition("=")
                key = key.strip()
                if not key or not key.replace("_", "").isalnum():
                    raise ConfigError(f"{path}: line {lineno}: bad key {key!r}")
                if key in values:
                    raise ConfigError(f"{path}: line {lineno}: duplicate key {key!r}")
                values[key] = parse_scalar(value)
        return cls(values, source=str(path))

    @classmethod
    def load(
        cls,
        path: os.PathLike | str | None,
        overrides: Mapping[str, object] | None = None,
    ) -> "RunConfig":
        cfg = cls.from_file(path) if path else cls({}, source="<flags>")
        for key, value in (overrides or {}).items():
            if value is not None:
                cfg.values[key] = value
        return cfg

    def ensure_known(self, allowed: Iterable[str]) -> None:
        extra = sorted(set(self.values) - set(allowed))
        if extra:
            raise ConfigError(
                f"unknown config key(s) for this command: {', '.join(extra)}"
            )

    def _get(self, key: str, default):
        if key in self.values:
            return self.values[key]
        if default is _MISSING:
            raise ConfigError(f"missing required config key {key!r}")
        return default

    def get_float(self, key: str, default=_MISSING) -> float:
        v = self._get(key, default)
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ConfigError(f"config key {key!r} must be a number, got {v!r}")
        return float(v)

    def get_int(self, key: str, default=_MISSING) -> int:
        v = self._get(key, default)
        if isinstance(v, bool) or not isinstance(v, int):
            raise ConfigError(f"config key {key!r} must be an integer, got {v!r}")
        return v

    def get_bool(self, key: str, default=_MISSING) -> bool:
        v = self._get(key, default)
        if not isinstance(v, bool):
            raise ConfigError(f"config key {key!r} must be true or false, got {v!r}")
        return v

    def get_str(self, key: str, default=_MISSING) -> str:
        v = self._get(key, default)
        if not isinstance(v, str):
            raise ConfigError(f"config key {key!r} must be a string, got {v!r}")
        return v

    def __contains__(self, key: str) -> bool:
        return key in self.values
