"""Flat ``key = value`` run configuration shared by the CLI commands."""

from __future__ import annotations

import os
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from .degrade import DegradeConfig, NoiseParams
from .erqa import ErqaConfig
from .gradients import GradientConfig

_SECTIONS = {
    "gradient": GradientConfig,
    "erqa": ErqaConfig,
    "degrade": DegradeConfig,
    "noise": NoiseParams,
}


@dataclass(frozen=True)
class RunConfig:
    erqa: ErqaConfig = field(default_factory=ErqaConfig)
    degrade: DegradeConfig = field(default_factory=DegradeConfig)
    noise: NoiseParams = field(default_factory=NoiseParams)

    def as_dict(self) -> dict:
        """Every setting materialized as a plain, JSON-ready mapping."""
        erqa = asdict(self.erqa)
        erqa.pop("gradient")
        grad = asdict(self.erqa.gradient)
        grad["filter_direction"] = self.erqa.gradient.filter_direction.value
        return {
            "gradient": grad,
            "erqa": erqa,
            "degrade": asdict(self.degrade),
            "noise": asdict(self.noise),
        }

    def with_overrides(self, **kwargs) -> "RunConfig":
        """Override settings by bare field name; ``None`` values are ignored."""
        return apply_settings(self, {k: v for k, v in kwargs.items() if v is not None})


def _owner(key: str) -> str:
    owners = [name for name, cls in _SECTIONS.items() if key in {f.name for f in fields(cls)}]
    owners = [o for o in owners if not (o == "erqa" and key == "gradient")]
    if not owners:
        raise ValueError(f"unknown config key {key!r}")
    return owners[0]


def _coerce(cls, key: str, raw):
    if not isinstance(raw, str):
        return raw
    default = getattr(cls(), key)
    if isinstance(default, bool):
        low = raw.strip().lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"{key}: expected a boolean, got {raw!r}")
    if isinstance(default, int):
        return int(raw)
    if isinstance(default, float):
        return float(raw)
    return raw.strip()


def apply_settings(cfg: RunConfig, settings: dict) -> RunConfig:
    grouped: dict[str, dict] = {name: {} for name in _SECTIONS}
    for key, raw in settings.items():
        # allow "section.key" as well as the bare key
        if "." in key:
            section, key = key.split(".", 1)
            if section not in _SECTIONS:
                raise ValueError(f"unknown config section {section!r}")
        else:
            section = _owner(key)
        grouped[section][key] = _coerce(_SECTIONS[section], key, raw)

    grad = replace(cfg.erqa.gradient, **grouped["gradient"])
    erqa = replace(cfg.erqa, gradient=grad, **grouped["erqa"])
    return RunConfig(
        erqa=erqa,
        degrade=replace(cfg.degrade, **grouped["degrade"]),
        noise=replace(cfg.noise, **grouped["noise"]),
    )


def parse_config_text(text: str) -> dict[str, str]:
    settings = {}
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line {n}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ValueError(f"config line {n}: empty key")
        settings[key] = value
    return settings


def load_config(path: str | os.PathLike | None) -> RunConfig:
    if path is None:
        return RunConfig()
    return apply_settings(RunConfig(), parse_config_text(Path(path).read_text(encoding="utf-8")))
