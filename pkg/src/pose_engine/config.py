"""Engine configuration: one validated model shared by the CLI, the
service, and the tests.

Precedence when assembling a config: built-in defaults, then a config
file, then explicit flags (the CLI applies the last layer).  Paths left
unset fall back to the data files shipped in the package.
"""
from __future__ import annotations

from pathlib import Path
from typing import Literal, Optional

import yaml
from pydantic import BaseModel, Field, field_validator

from . import defaults
from .errors import ConfigError


class StaleConfig(BaseModel):
    fresh_ms: float = 100.0
    hold_ms: float = 1000.0


class IkConfig(BaseModel):
    max_iterations: int = Field(default=200, ge=1)
    tolerance: Optional[float] = Field(default=None, gt=0.0)


class EngineConfig(BaseModel):
    scheme: Path = defaults.SCHEME_33
    rig: Path = defaults.RIG_HUMANOID
    retarget_map: Path = defaults.MAP_HUMANOID
    calibration: Optional[Path] = None

    input: str = "synthetic:30:10"
    output: str = "stdout"

    mode: Literal["step", "threaded"] = "threaded"
    pipeline: Literal["auto", "identity"] = "auto"  # identity: pass-through stages for overhead measurement
    input_kind: Literal["auto", "keypoints3d", "keypoints2d", "joint_config"] = "auto"
    input_up_axis: Literal["y", "z"] = "y"
    sink_mode: Literal["auto", "paced", "follow"] = "auto"

    min_confidence: float = Field(default=0.5, ge=0.0, le=1.0)
    sync_window_ms: float = Field(default=20.0, gt=0.0)
    output_rate_hz: float = Field(default=30.0, gt=0.0)
    replay_speed: float = Field(default=1.0, gt=0.0)
    max_duration_ms: Optional[float] = Field(default=None, gt=0.0)

    stale: StaleConfig = StaleConfig()
    ik: IkConfig = IkConfig()

    @field_validator("scheme", "rig", "retarget_map")
    @classmethod
    def _must_exist(cls, value: Path) -> Path:
        if not Path(value).exists():
            raise ValueError(f"file not found: {value}")
        return value

    @field_validator("calibration")
    @classmethod
    def _calibration_must_exist(cls, value: Optional[Path]) -> Optional[Path]:
        if value is not None and not Path(value).exists():
            raise ValueError(f"file not found: {value}")
        return value

    def input_spec(self) -> tuple[str, list[str]]:
        return parse_io_spec(self.input)

    def output_spec(self) -> tuple[str, list[str]]:
        return parse_io_spec(self.output)


def parse_io_spec(spec: str) -> tuple[str, list[str]]:
    """Split an input/output spec into (kind, args).

    Accepted forms: file:PATH, dual-file:PATH_A,PATH_B, socket:[HOST:]PORT,
    dual-socket:[HOST:]PORT_A,PORT_B, synthetic:FPS[:DURATION_S], stdout,
    null.
    """
    if spec in ("stdout", "null"):
        return spec, []
    kind, _, rest = spec.partition(":")
    if kind == "synthetic" and rest:
        return kind, rest.split(":")
    if kind in ("file", "dual-file", "socket", "dual-socket") and rest:
        return kind, rest.split(",") if "," in rest else [rest]
    raise ConfigError(f"cannot parse i/o spec {spec!r}")


def load_config_file(path: str | Path) -> dict:
    try:
        doc = yaml.safe_load(Path(path).read_text())
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    if doc is None:
        return {}
    if not isinstance(doc, dict):
        raise ConfigError(f"config file {path} must be a mapping")
    return doc


def build_config(file_path: str | Path | None = None, **overrides) -> EngineConfig:
    """defaults < config file < explicit overrides (None means unset).

    The nested sections (stale, ik) merge per field, so a flag overriding
    one value keeps the file's setting for the others.
    """
    layers: dict = {}
    if file_path is not None:
        layers.update(load_config_file(file_path))
    for key, value in overrides.items():
        if value is None:
            continue
        if key in ("stale", "ik") and isinstance(value, dict):
            merged = dict(layers.get(key) or {})
            merged.update({k: v for k, v in value.items() if v is not None})
            if merged:
                layers[key] = merged
        else:
            layers[key] = value
    try:
        return EngineConfig(**layers)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
