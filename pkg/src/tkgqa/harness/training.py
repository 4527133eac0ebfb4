"""QA training loop with early stopping, plus full-model checkpoints.

Checkpoints are single npz archives holding the KG tables, every QA
parameter array, and a JSON config snapshot with a format version; they
round-trip bit-exactly.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

import numpy as np

from ..config import PipelineConfig, TrainingSection, config_from_dict
from ..errors import DivergenceError, InputError
from ..optim import Adam
from ..tcomplex import ComplexEmbeddingTable, TkgEmbeddings
from .data import QuestionInstance
from .metrics import hits1
from .model import QaModel, QaParams, init_qa_params

logger = logging.getLogger(__name__)

CHECKPOINT_FORMAT_VERSION = 1


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    valid_hits1: float


@dataclass
class TrainResult:
    history: list[EpochRecord] = field(default_factory=list)
    best_epoch: int = -1
    best_valid_hits1: float = 0.0
    stopped_early: bool = False


def train_qa(model: QaModel, train_set: list[QuestionInstance],
             valid_set: list[QuestionInstance], cfg: TrainingSection,
             seed: int = 0) -> TrainResult:
    """Adam on fusion + projection (and, when configured, the KG tables).

    Early stopping tracks overall validation Hits@1 with the configured
    patience; the best-epoch parameters are restored before returning.
    Deterministic under a fixed seed (modulo the platform's BLAS reduction
    order, which is stable within one build).
    """
    if not train_set:
        raise InputError("empty training set")
    params = model.qa.params()
    if cfg.finetune_kg:
        params.update(model.emb.params())
    result = TrainResult()
    if cfg.epochs == 0:
        return result

    prepared = [model.prepare(q) for q in train_set]
    opt = Adam(params, lr=cfg.lr)
    rng = np.random.default_rng(seed)
    best = {k: v.copy() for k, v in params.items()}
    best_metric = -1.0
    since_best = 0

    for epoch in range(cfg.epochs):
        order = rng.permutation(len(prepared))
        epoch_loss = 0.0
        for start in range(0, len(order), cfg.batch_size):
            batch = [prepared[i] for i in order[start:start + cfg.batch_size]]
            grads = {k: np.zeros_like(v) for k, v in params.items()}
            batch_loss = 0.0
            for prep in batch:
                out = model.forward(prep, grads=grads, include_tables=cfg.finetune_kg)
                batch_loss += out.loss
            batch_loss /= len(batch)
            if not np.isfinite(batch_loss):
                raise DivergenceError(
                    f"non-finite QA loss at epoch {epoch}; last good epoch {result.best_epoch}"
                )
            for g in grads.values():
                g /= len(batch)
            opt.step(grads)
            epoch_loss += batch_loss * len(batch)
        epoch_loss /= len(prepared)

        valid_metric = hits1(model, valid_set) if valid_set else -epoch_loss
        result.history.append(EpochRecord(epoch=epoch, train_loss=epoch_loss,
                                          valid_hits1=max(valid_metric, 0.0)))
        if cfg.log_every and (epoch + 1) % cfg.log_every == 0:
            logger.info("qa epoch %d/%d loss %.4f valid hits@1 %.3f",
                        epoch + 1, cfg.epochs, epoch_loss, valid_metric)
        if valid_metric > best_metric:
            best_metric = valid_metric
            result.best_epoch = epoch
            result.best_valid_hits1 = max(valid_metric, 0.0)
            for k, v in params.items():
                best[k][...] = v
            since_best = 0
        else:
            since_best += 1
            if cfg.patience and since_best >= cfg.patience:
                result.stopped_early = True
                break

    if cfg.restore_best:
        for k, v in params.items():
            v[...] = best[k]
    return result


# -- checkpoints ----------------------------------------------------------

def _mangle(name: str) -> str:
    return "param__" + name.replace(".", "__")


def _unmangle(key: str) -> str:
    return key[len("param__"):].replace("__", ".")


def save_checkpoint(path, model: QaModel, config: PipelineConfig) -> None:
    """One archive: KG tables + QA parameters + config snapshot + version."""
    meta = {
        "format_version": CHECKPOINT_FORMAT_VERSION,
        "config": config.to_dict(),
        "share_directions": model.qa.mw_s is None,
        "branches": list(model.qa.mw_q.branches),
        "d_txt": int(model.qa.fusion.b_s.shape[0]),
        "d_kg": int(model.emb.d_kg),
    }
    arrays = {_mangle(k): v for k, v in model.qa.params().items()}
    arrays.update({_mangle(k): v for k, v in model.emb.params().items()})
    np.savez(path, meta=np.array(json.dumps(meta, sort_keys=True)), **arrays)


def load_checkpoint(path) -> tuple[TkgEmbeddings, QaParams, PipelineConfig]:
    with np.load(path, allow_pickle=False) as npz:
        meta = json.loads(str(npz["meta"]))
        if meta.get("format_version") != CHECKPOINT_FORMAT_VERSION:
            raise InputError(f"unsupported checkpoint version {meta.get('format_version')!r}")
        arrays = {_unmangle(k): npz[k] for k in npz.files if k.startswith("param__")}
    config = config_from_dict(meta["config"])
    emb = TkgEmbeddings(
        entities=ComplexEmbeddingTable(arrays.pop("kg.ent_real"), arrays.pop("kg.ent_imag")),
        predicates=ComplexEmbeddingTable(arrays.pop("kg.pred_real"), arrays.pop("kg.pred_imag")),
        timestamps=ComplexEmbeddingTable(arrays.pop("kg.time_real"), arrays.pop("kg.time_imag")),
    )
    qa = init_qa_params(
        d_txt=meta["d_txt"], d_kg=meta["d_kg"], seed=0,
        branches=tuple(meta["branches"]), share_directions=meta["share_directions"],
    )
    for name, arr in qa.params().items():
        if name not in arrays:
            raise InputError(f"checkpoint missing parameter {name}")
        if arrays[name].shape != arr.shape:
            raise InputError(f"checkpoint parameter {name} has shape {arrays[name].shape}, "
                             f"expected {arr.shape}")
        arr[...] = arrays[name]
    return emb, qa, config
