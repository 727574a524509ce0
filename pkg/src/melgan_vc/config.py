"""Run configuration: the five config groups and the ``key = value`` file format."""
from __future__ import annotations

import dataclasses
import typing
from dataclasses import dataclass, field
from pathlib import Path

from .chunker import ChunkConfig
from .dsp import DspConfig
from .losses import LossWeights
from .models import ModelConfig


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 16
    lr_d: float = 4e-4
    lr_gs: float = 1e-4
    d_updates_per_gs: int = 2
    adam_beta1: float = 0.5
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    total_steps: int = 10000
    checkpoint_every: int = 1000
    log_every: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.batch_size < 2:
            raise ValueError("batch_size must be >= 2 (TraVeL needs pairs)")
        if not (self.lr_d > 0 and self.lr_gs > 0):
            raise ValueError("learning rates must be positive")
        if self.d_updates_per_gs < 1:
            raise ValueError("d_updates_per_gs must be >= 1")
        if self.total_steps < 0:
            raise ValueError("total_steps must be >= 0")
        if self.checkpoint_every < 1 or self.log_every < 1:
            raise ValueError("checkpoint_every and log_every must be >= 1")


_GROUPS = {
    "dsp": DspConfig,
    "chunk": ChunkConfig,
    "model": ModelConfig,
    "loss": LossWeights,
    "train": TrainConfig,
}


@dataclass(frozen=True)
class RunConfig:
    dsp: DspConfig = field(default_factory=DspConfig)
    chunk: ChunkConfig = field(default_factory=ChunkConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    loss: LossWeights = field(default_factory=LossWeights)
    train: TrainConfig = field(default_factory=TrainConfig)

    def __post_init__(self):
        self.model.check_chunk_shape(self.dsp.mel_channels, self.chunk.half)

    def to_dict(self) -> dict:
        return {name: dataclasses.asdict(getattr(self, name)) for name in _GROUPS}

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        return cls(**{name: klass(**d.get(name, {})) for name, klass in _GROUPS.items()})

    def replace(self, **overrides) -> "RunConfig":
        """Return a copy with flat field overrides, e.g. ``alpha=0, total_steps=5``."""
        parts = {name: dataclasses.asdict(getattr(self, name)) for name in _GROUPS}
        owner = _field_owners()
        for key, value in overrides.items():
            if key not in owner:
                raise KeyError(f"unknown config key: {key}")
            parts[owner[key]][key] = value
        # re-derive dependent defaults unless given explicitly
        if "hop_size" in overrides:
            for key in ("window_size", "fft_size", "mel_channels"):
                if key not in overrides:
                    parts["dsp"][key] = None
            if "L" not in overrides:
                parts["chunk"]["L"] = overrides["hop_size"] // 2
        if "sample_rate" in overrides and "mel_fmax" not in overrides:
            parts["dsp"]["mel_fmax"] = None
        return RunConfig.from_dict(parts)


def _field_owners() -> dict:
    owner = {}
    for name, klass in _GROUPS.items():
        for f in dataclasses.fields(klass):
            owner[f.name] = name
    return owner


def _coerce(raw: str, hint):
    if raw.lower() == "none":
        return None
    args = [a for a in typing.get_args(hint) if a is not type(None)] or [hint]
    base = args[0]
    if base is int:
        return int(raw)
    if base is float:
        return float(raw)
    return raw


def parse_config_text(text: str, base: RunConfig | None = None) -> RunConfig:
    """Parse ``key = value`` lines; ``#`` starts a comment. Unknown keys are an error."""
    base = base or RunConfig()
    owner = _field_owners()
    hints = {name: typing.get_type_hints(klass) for name, klass in _GROUPS.items()}
    overrides = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, raw = (part.strip() for part in line.split("=", 1))
        if key not in owner:
            raise ValueError(f"line {lineno}: unknown config key {key!r}")
        try:
            overrides[key] = _coerce(raw, hints[owner[key]][key])
        except ValueError as exc:
            raise ValueError(f"line {lineno}: bad value for {key}: {raw!r}") from exc
    return base.replace(**overrides)


def load_config(path, base: RunConfig | None = None) -> RunConfig:
    return parse_config_text(Path(path).read_text(encoding="utf-8"), base)


def format_config(cfg: RunConfig) -> str:
    lines = []
    for name, values in cfg.to_dict().items():
        lines.append(f"# {name}")
        lines += [f"{k} = {v}" for k, v in values.items()]
    return "\n".join(lines) + "\n"
