"""Pipeline configuration: one JSON document with per-stage sections.

Every default is defined here (and documented in the README); a config
file only overrides what it names.  Unknown sections or keys raise
ConfigError so typos never pass silently.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError
from .fusion import BRANCHES


@dataclass
class KgSection:
    """TKG embedding pre-training."""

    d_kg: int = 64
    epochs: int = 200
    lr: float = 5e-2
    batch_size: int = 256
    l2: float = 1e-4
    init_scale: float = 0.1


@dataclass
class EncoderSection:
    backend: str = "mock"  # "mock" | "pretrained"
    d_txt: int = 64        # mock width; the pretrained adapter reports its own
    seed: int = 0
    model_id: str = "bert-base-uncased"
    finetune: bool = False


@dataclass
class FusionSection:
    branches: tuple[str, ...] = BRANCHES
    k_spo: int = 10
    pool_cap: int = 200
    share_directions: bool = False
    adaptive_gate: bool = True
    use_selector: bool = True
    pool_mode: str = "mean"  # "mean" | "summary"


@dataclass
class TrainingSection:
    """QA training."""

    epochs: int = 200
    lr: float = 5e-3
    batch_size: int = 32
    patience: int = 30      # 0 disables early stopping
    restore_best: bool = True  # keep the best-validation parameters at the end
    finetune_kg: bool = False
    log_every: int = 20


@dataclass
class EvalSection:
    hits_ks: tuple[int, ...] = (1, 10)
    split: str = "test"
    top_k: int = 10


@dataclass
class SynthSection:
    """Synthetic benchmark generator."""

    num_entities: int = 30
    num_predicates: int = 3
    year_start: int = 2000
    year_end: int = 2010
    facts_per_entity: float = 5.0
    questions_per_category: int = 40
    train_fraction: float = 0.7
    valid_fraction: float = 0.15
    max_term_years: int = 4


@dataclass
class PipelineConfig:
    seed: int = 0
    kg: KgSection = field(default_factory=KgSection)
    encoder: EncoderSection = field(default_factory=EncoderSection)
    fusion: FusionSection = field(default_factory=FusionSection)
    training: TrainingSection = field(default_factory=TrainingSection)
    eval: EvalSection = field(default_factory=EvalSection)
    synth: SynthSection = field(default_factory=SynthSection)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def validate(self) -> None:
        if self.encoder.backend not in ("mock", "pretrained"):
            raise ConfigError(f"encoder.backend must be mock|pretrained, got {self.encoder.backend!r}")
        if self.encoder.finetune:
            raise ConfigError(
                "encoder.finetune=true is not supported: the training path has no "
                "encoder backward (the mock encoder has no trainable weights)"
            )
        if not self.fusion.branches or any(b not in BRANCHES for b in self.fusion.branches):
            raise ConfigError(f"fusion.branches must be a non-empty subset of {BRANCHES}")
        if self.fusion.pool_mode not in ("mean", "summary"):
            raise ConfigError(f"fusion.pool_mode must be mean|summary, got {self.fusion.pool_mode!r}")
        if self.fusion.k_spo < 1:
            raise ConfigError("fusion.k_spo must be >= 1")
        if self.synth.year_end <= self.synth.year_start:
            raise ConfigError("synth year range is empty")
        if self.synth.num_entities < 3:
            raise ConfigError("synth.num_entities must be >= 3")
        if not (0 < self.synth.train_fraction < 1) or not (0 <= self.synth.valid_fraction < 1):
            raise ConfigError("synth split fractions out of range")
        if self.synth.train_fraction + self.synth.valid_fraction >= 1:
            raise ConfigError("synth train+valid fractions must leave room for test")
        if self.eval.split not in ("train", "valid", "test"):
            raise ConfigError(f"eval.split must be train|valid|test, got {self.eval.split!r}")
        if any(k < 1 for k in self.eval.hits_ks):
            raise ConfigError("eval.hits_ks entries must be >= 1")


_SECTIONS = {
    "kg": KgSection,
    "encoder": EncoderSection,
    "fusion": FusionSection,
    "training": TrainingSection,
    "eval": EvalSection,
    "synth": SynthSection,
}

_TUPLE_FIELDS = {("fusion", "branches"), ("eval", "hits_ks")}


def config_from_dict(doc: dict) -> PipelineConfig:
    if not isinstance(doc, dict):
        raise ConfigError("config document must be a JSON object")
    cfg = PipelineConfig()
    for key, value in doc.items():
        if key == "seed":
            cfg.seed = int(value)
            continue
        section_type = _SECTIONS.get(key)
        if section_type is None:
            raise ConfigError(f"unknown config section {key!r}")
        if not isinstance(value, dict):
            raise ConfigError(f"config section {key!r} must be an object")
        section = getattr(cfg, key)
        valid = {f.name for f in dataclasses.fields(section_type)}
        for name, raw in value.items():
            if name not in valid:
                raise ConfigError(f"unknown key {key}.{name}")
            if (key, name) in _TUPLE_FIELDS:
                raw = tuple(raw)
            setattr(section, name, raw)
    cfg.validate()
    return cfg


def load_config(path: str | Path | None) -> PipelineConfig:
    """Config from a JSON file; all defaults when path is None."""
    if path is None:
        cfg = PipelineConfig()
        cfg.validate()
        return cfg
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
    return config_from_dict(doc)
