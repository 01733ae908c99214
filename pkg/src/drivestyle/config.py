"""Run configuration: a JSON file with strict schema checking.

Every section maps onto a dataclass; unknown keys anywhere are rejected
so typos fail fast.  A seed is mandatory (from the file or the command
line).  Credentials never appear here: the LLM and embedding sections
name an environment variable, nothing more.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field

from .embed import EmbedConfig
from .errors import ConfigError
from .features import (
    DEFAULT_SIGNALS,
    DEFAULT_TAU,
    EXTENDED_SIGNALS_10,
    EXTENDED_SIGNALS_36,
)
from .ingest import NOMINAL_DT, CleanConfig
from .model import ModelConfig
from .semantic import LlmConfig
from .training import TrainConfig

SIGNAL_PRESETS = {
    "default": DEFAULT_SIGNALS,
    "extended10": EXTENDED_SIGNALS_10,
    "extended36": EXTENDED_SIGNALS_36,
}


@dataclass
class FeatureSettings:
    signals: object = "default"  # preset name or explicit list of signal specs
    tau: float = DEFAULT_TAU

    def resolve_signals(self) -> tuple[str, ...]:
        if isinstance(self.signals, str):
            if self.signals not in SIGNAL_PRESETS:
                raise ConfigError(
                    f"unknown signal preset {self.signals!r}; "
                    f"known: {sorted(SIGNAL_PRESETS)}"
                )
            return SIGNAL_PRESETS[self.signals]
        return tuple(str(s) for s in self.signals)


@dataclass
class SplitSettings:
    ratios: tuple[float, float, float] = (0.8, 0.1, 0.1)

    def __post_init__(self) -> None:
        self.ratios = tuple(float(r) for r in self.ratios)
        if len(self.ratios) != 3:
            raise ConfigError("split ratios must have exactly three entries")


@dataclass
class SynthSettings:
    n_per_class: int = 250
    length: int = 150
    dt: float = NOMINAL_DT
    margin: float = 1.0


@dataclass
class RunConfig:
    seed: int
    out_dir: str = "runs/out"
    cache_dir: str | None = None
    features: FeatureSettings = field(default_factory=FeatureSettings)
    clean: CleanConfig = field(default_factory=CleanConfig)
    llm: LlmConfig = field(default_factory=LlmConfig)
    embedding: EmbedConfig = field(default_factory=EmbedConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    split: SplitSettings = field(default_factory=SplitSettings)
    synth: SynthSettings = field(default_factory=SynthSettings)

    def force_offline(self) -> None:
        self.llm.endpoint = None
        self.embedding.endpoint = None

    def as_dict(self) -> dict:
        def unpack(obj):
            if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
                return {
                    f.name: unpack(getattr(obj, f.name))
                    for f in dataclasses.fields(obj)
                }
            if isinstance(obj, tuple):
                return [unpack(v) for v in obj]
            return obj

        return unpack(self)


def _make(cls, payload: dict, where: str):
    if not isinstance(payload, dict):
        raise ConfigError(f"section {where!r} must be an object")
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = set(payload) - known
    if unknown:
        raise ConfigError(f"unknown keys in {where!r}: {sorted(unknown)}")
    try:
        return cls(**payload)
    except (TypeError, ValueError) as err:
        raise ConfigError(f"bad section {where!r}: {err}") from None


_SECTIONS = {
    "features": FeatureSettings,
    "clean": CleanConfig,
    "llm": LlmConfig,
    "embedding": EmbedConfig,
    "model": ModelConfig,
    "train": TrainConfig,
    "split": SplitSettings,
    "synth": SynthSettings,
}
_SCALARS = {"seed", "out_dir", "cache_dir"}


def parse_run_config(payload: dict, source: str = "<config>") -> RunConfig:
    if not isinstance(payload, dict):
        raise ConfigError(f"{source}: top level must be an object")
    unknown = set(payload) - _SCALARS - set(_SECTIONS)
    if unknown:
        raise ConfigError(f"{source}: unknown top-level keys {sorted(unknown)}")
    kwargs: dict = {}
    for name in _SCALARS & set(payload):
        kwargs[name] = payload[name]
    for name, cls in _SECTIONS.items():
        if name in payload:
            kwargs[name] = _make(cls, payload[name], name)
    if "seed" not in kwargs:
        raise ConfigError(f"{source}: a seed is required (config key or --seed)")
    if not isinstance(kwargs["seed"], int) or isinstance(kwargs["seed"], bool):
        raise ConfigError(f"{source}: seed must be an integer")
    config = RunConfig(**kwargs)
    config.model.validate()
    config.train.validate()
    config.train.seed = config.seed
    return config


def load_run_config(
    path: str | None,
    seed_override: int | None = None,
    out_override: str | None = None,
    offline: bool = False,
) -> RunConfig:
    """Load a config file and apply command-line overrides.

    Without a file, defaults apply and ``seed_override`` is mandatory.
    """
    if path is None:
        payload: dict = {}
    else:
        try:
            with open(path) as fh:
                payload = json.load(fh)
        except OSError as err:
            raise ConfigError(f"cannot read config {path}: {err}") from None
        except json.JSONDecodeError as err:
            raise ConfigError(f"config {path} is not valid JSON: {err}") from None
    if seed_override is not None:
        payload = {**payload, "seed": seed_override}
    config = parse_run_config(payload, source=path or "<defaults>")
    if out_override is not None:
        config.out_dir = out_override
    if offline:
        config.force_offline()
    return config
