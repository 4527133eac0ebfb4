"""Component ablations: drop one module, retrain, compare.

Variants (matching the component study):

* ``spo_selector``     — no candidate facts reach fusion (fusion skipped)
* ``concat_attention`` — drop the cat branch (output map shrinks to 4d)
* ``dot_attention``    — drop the dot branch
* ``minus_attention``  — drop the minus branch
* ``adaptive_fusion``  — fixed 0.5 blend instead of the learned gate
"""

from __future__ import annotations

import dataclasses
import logging

from ..config import PipelineConfig
from ..errors import ConfigError
from ..tcomplex import TkgEmbeddings
from .data import QuestionInstance
from .metrics import MetricsReport, evaluate
from .model import QaModel, init_qa_params
from .synth import SyntheticDataset
from .training import train_qa

logger = logging.getLogger(__name__)

ABLATION_FLAGS = (
    "spo_selector",
    "concat_attention",
    "dot_attention",
    "minus_attention",
    "adaptive_fusion",
)

_BRANCH_OF = {"concat_attention": "cat", "dot_attention": "dot", "minus_attention": "minus"}


def ablated_config(config: PipelineConfig, flag: str | None) -> PipelineConfig:
    """Config for one variant; flag None returns the full model's config."""
    out = dataclasses.replace(config)
    out.fusion = dataclasses.replace(config.fusion)
    if flag is None:
        return out
    if flag == "spo_selector":
        out.fusion.use_selector = False
    elif flag == "adaptive_fusion":
        out.fusion.adaptive_gate = False
    elif flag in _BRANCH_OF:
        dropped = _BRANCH_OF[flag]
        out.fusion.branches = tuple(b for b in config.fusion.branches if b != dropped)
        if not out.fusion.branches:
            raise ConfigError("cannot drop the only attention branch")
    else:
        raise ConfigError(f"unknown ablation flag {flag!r}")
    return out


def train_variant(dataset: SyntheticDataset, emb: TkgEmbeddings, encoder,
                  config: PipelineConfig, flag: str | None, seed: int,
                  eval_set: list[QuestionInstance] | None = None) -> MetricsReport:
    """Train one variant from scratch and evaluate it."""
    cfg = ablated_config(config, flag)
    qa = init_qa_params(
        d_txt=encoder.d_txt, d_kg=emb.d_kg, seed=seed,
        branches=cfg.fusion.branches, share_directions=cfg.fusion.share_directions,
    )
    model = QaModel(dataset.kg, emb.copy(), encoder, qa, cfg.fusion)
    train_qa(model, dataset.train, dataset.valid, cfg.training, seed=seed)
    questions = eval_set if eval_set is not None else dataset.test
    report, _ = evaluate(model, questions, ks=tuple(cfg.eval.hits_ks))
    return report


def ablate(dataset: SyntheticDataset, emb: TkgEmbeddings, encoder,
           config: PipelineConfig, flags: tuple[str, ...] = ABLATION_FLAGS,
           seed: int = 0) -> dict[str, MetricsReport]:
    """Full model plus each flagged variant, same seed and config throughout."""
    for flag in flags:
        if flag not in ABLATION_FLAGS:
            raise ConfigError(f"unknown ablation flag {flag!r}")
    reports = {"full": train_variant(dataset, emb, encoder, config, None, seed)}
    for flag in flags:
        logger.info("training ablation variant: w/o %s", flag)
        reports[f"no_{flag}"] = train_variant(dataset, emb, encoder, config, flag, seed)
    return reports
