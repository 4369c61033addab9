"""Flat ``key = value`` run configuration shared by every CLI command."""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields
from pathlib import Path

from .ahmr import HyperParams
from .errors import KinemotionError
from .training import TrainConfig


class ConfigError(KinemotionError, ValueError):
    pass


@dataclass
class RunConfig:
    # network
    hidden_size: int = 32
    recurrent_steps: int = 5
    context_window: int = 3
    input_frames: int = 50
    output_frames: int = 10
    representation: str = "stiefel"
    # optimisation
    lr0: float = 1e-3
    decay: float = 0.95
    decay_every: int = 5000
    batch: int = 16
    clip_norm: float = 5.0
    max_iters: int = 1000
    seed: int = 0
    loss: str = "geodesic"
    log_every: int = 50
    # data
    dataset: str = ""
    synthetic: str = ""
    skeleton: str = ""
    frame_rate: float = 50.0
    step: int = 1
    pattern: str = "*.csv"
    # synthetic pendulum
    bones: int = 4
    frames: int = 500
    freq: float = 0.5
    amplitude: float = 0.5
    # files
    out: str = "run"
    checkpoint: str = ""
    input: str = ""
    output: str = ""
    metrics: str = ""
    # predict / eval / convert
    steps: int = 10
    stride: int = 10
    metric: str = "both"
    include_root: bool = False
    mae_form: str = "vector"
    mae_reduction: str = "mean"
    from_rep: str = "axis_angle"
    to_rep: str = "quaternion"

    def hyper(self) -> HyperParams:
        keys = {f.name for f in fields(HyperParams)}
        return HyperParams(**{k: v for k, v in asdict(self).items() if k in keys})

    def train_config(self) -> TrainConfig:
        keys = {f.name for f in fields(TrainConfig)}
        return TrainConfig(**{k: v for k, v in asdict(self).items() if k in keys})

    def echo(self):
        return "".join(f"{k} = {format_value(v)}\n" for k, v in asdict(self).items())


FIELD_TYPES = {f.name: type(f.default) for f in fields(RunConfig)}


def format_value(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    return repr(v) if isinstance(v, float) else str(v)


def coerce(key, text):
    if key not in FIELD_TYPES:
        raise ConfigError(f"unknown config key {key!r}")
    kind = FIELD_TYPES[key]
    text = str(text).strip()
    try:
        if kind is bool:
            low = text.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        return kind(text)
    except ValueError:
        raise ConfigError(f"{key}: cannot read {text!r} as {kind.__name__}") from None


def parse_config(text, source="<config>"):
    """``key = value`` lines; ``#`` starts a comment. Unknown keys are errors."""
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        try:
            values[key] = coerce(key, value)
        except ConfigError as exc:
            raise ConfigError(f"{source}:{lineno}: {exc}") from None
    return values


def load_config(path=None, overrides=None) -> RunConfig:
    values = parse_config(Path(path).read_text(), str(path)) if path else {}
    for key, value in (overrides or {}).items():
        values[key] = coerce(key, value)
    return RunConfig(**values)
