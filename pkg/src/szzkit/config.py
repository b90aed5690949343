"""Run configuration: a flat ``key = value`` file overridden by CLI flags."""

from __future__ import annotations

import os
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Mapping

from .tracing import DEFAULT_THRESHOLD, Mode
from .variants import Algorithm

ALL_ALGORITHMS = ("B", "AG", "L", "R", "MA", "PYD", "TC")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    repo: str = "."
    until: str = "HEAD"
    algorithms: tuple[str, ...] = ALL_ALGORITHMS
    tc_mode: str = Mode.UNIQUE.value
    blame_count: int = -1
    similarity_threshold: float = DEFAULT_THRESHOLD
    out: str = "szz-out"
    workers: int = field(default_factory=lambda: os.cpu_count() or 1)
    emit_prompts: bool = False
    attribution: bool = False

    def validate(self) -> "RunConfig":
        if not self.algorithms:
            raise ConfigError("algorithms must not be empty")
        for a in self.algorithms:
            try:
                Algorithm(a)
            except ValueError:
                raise ConfigError(f"unknown algorithm {a!r}") from None
        if not 0 < self.similarity_threshold <= 1:
            raise ConfigError("similarity_threshold must be in (0, 1]")
        if self.blame_count == 0 or self.blame_count < -1:
            raise ConfigError("blame_count must be >= 1 or -1")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        try:
            Mode(self.tc_mode)
        except ValueError:
            raise ConfigError(f"unknown tc_mode {self.tc_mode!r}") from None
        return self

    @property
    def effective_tc_mode(self) -> Mode:
        """A finite blame count always means CustomBlame."""
        return Mode.CUSTOM if self.blame_count != -1 else Mode(self.tc_mode)

    @property
    def out_dir(self) -> Path:
        return Path(self.out)


def _coerce(name: str, raw: str):
    if name == "algorithms":
        return parse_algorithms(raw)
    if name in ("blame_count", "workers"):
        return int(raw)
    if name == "similarity_threshold":
        return float(raw)
    if name in ("emit_prompts", "attribution"):
        low = raw.strip().lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off", ""):
            return False
        raise ConfigError(f"{name}: not a boolean: {raw!r}")
    return raw


def parse_algorithms(raw: str) -> tuple[str, ...]:
    items = [x.strip().upper() for x in raw.replace(",", " ").split() if x.strip()]
    return tuple(dict.fromkeys(items))


def parse_config_text(text: str) -> dict:
    known = {f.name for f in fields(RunConfig)}
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip().replace("-", "_")
        if not sep:
            raise ConfigError(f"line {lineno}: expected key = value")
        if key not in known:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        try:
            out[key] = _coerce(key, value.strip())
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: {exc}") from None
    return out


def load_config(path: str | Path | None = None, overrides: Mapping | None = None) -> RunConfig:
    values: dict = {}
    if path is not None:
        values.update(parse_config_text(Path(path).read_text(encoding="utf-8")))
    for k, v in (overrides or {}).items():
        if v is not None:
            values[k] = v
    return RunConfig(**values).validate()
