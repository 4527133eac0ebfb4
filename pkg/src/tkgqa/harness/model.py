"""End-to-end QA model: encoder -> selector -> fusion -> answer head.

The model owns frozen inputs (KG, embedding tables, text encoder) plus the
trainable fusion/projection parameters.  Questions are prepared once
(encoding, candidate selection and annotation-row lookup are all
deterministic and parameter-free) and the numeric forward/backward runs on
the prepared tensors.

When a question's annotated entities touch no facts (or the selector is
disabled), fusion is skipped and the raw token rows feed the answer head;
the prediction metadata records this.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..answer import (
    ProjectionParams,
    ScoreVector,
    gold_indices,
    init_projection,
    loss_and_score_grad,
    predict,
    rank_of_best_gold,
    score_answers_backward,
    score_answers_rows,
)
from ..config import FusionSection
from ..errors import ConfigError
from ..fusion import (
    FusionParams,
    MultiwayParams,
    adaptive_fuse_backward,
    adaptive_fuse_forward,
    init_fusion,
    init_multiway,
    multiway_backward,
    multiway_forward,
)
from ..kg import TemporalKG
from ..selector import build_candidate_pool, select_spos
from ..tcomplex import TkgEmbeddings
from .data import QuestionInstance


@dataclass
class QaParams:
    """Trainable parameters of the QA side (KG tables live separately)."""

    mw_q: MultiwayParams
    mw_s: MultiwayParams | None  # None -> shared with mw_q
    fusion: FusionParams
    proj: ProjectionParams

    @property
    def direction_s(self) -> MultiwayParams:
        return self.mw_q if self.mw_s is None else self.mw_s

    @property
    def s_prefix(self) -> str:
        return "qa.mw_q" if self.mw_s is None else "qa.mw_s"

    def params(self) -> dict[str, np.ndarray]:
        out = self.mw_q.params("qa.mw_q")
        if self.mw_s is not None:
            out.update(self.mw_s.params("qa.mw_s"))
        out.update(self.fusion.params("qa.fuse"))
        out.update(self.proj.params("qa.proj"))
        return out


def init_qa_params(d_txt: int, d_kg: int, seed: int, branches=None,
                   share_directions: bool = False) -> QaParams:
    rng = np.random.default_rng(seed)
    from ..fusion import BRANCHES

    branches = tuple(branches) if branches else BRANCHES
    mw_q = init_multiway(d_txt, rng, branches)
    mw_s = None if share_directions else init_multiway(d_txt, rng, branches)
    return QaParams(
        mw_q=mw_q,
        mw_s=mw_s,
        fusion=init_fusion(d_txt, rng),
        proj=init_projection(d_txt, d_kg, rng),
    )


@dataclass
class PreparedQuestion:
    """Deterministic per-question tensors feeding the numeric passes."""

    instance: QuestionInstance
    qbar: np.ndarray            # (n, d_txt) rows entering fusion
    spo_summaries: np.ndarray   # (m, d_txt)
    selected_facts: list[int]   # indices into kg.facts
    s_row: int
    t_row: int
    o_row: int
    gold: np.ndarray            # indices into the concatenated score vector


@dataclass
class ForwardOutput:
    loss: float
    scores: ScoreVector
    gates: np.ndarray | None
    fusion_skipped: bool


@dataclass
class QuestionPrediction:
    question_id: str
    category: str
    answer_type: str
    rank: int
    top: list[tuple[str, int]]
    top_scores: list[float]
    gate_mean: float | None
    fusion_skipped: bool
    selected_facts: list[int] = field(default_factory=list)


class QaModel:
    def __init__(self, kg: TemporalKG, emb: TkgEmbeddings, encoder, qa_params: QaParams,
                 fusion_cfg: FusionSection | None = None):
        self.kg = kg
        self.emb = emb
        self.encoder = encoder
        self.qa = qa_params
        self.cfg = fusion_cfg or FusionSection()
        if tuple(self.cfg.branches) != self.qa.mw_q.branches:
            raise ConfigError(
                f"config branches {self.cfg.branches} do not match parameters "
                f"{self.qa.mw_q.branches}"
            )
        self._text_cache: dict[str, np.ndarray] = {}
        self._token_cache: dict[str, object] = {}
        self._prepared: dict[str, PreparedQuestion] = {}
        self._fact_index = {fact: i for i, fact in enumerate(kg.facts)}

    # -- preparation ----------------------------------------------------

    def _encode(self, text: str):
        tm = self._token_cache.get(text)
        if tm is None:
            tm = self.encoder.encode(text)
            self._token_cache[text] = tm
        return tm

    def prepare(self, instance: QuestionInstance) -> PreparedQuestion:
        prep = self._prepared.get(instance.id)
        if prep is not None:
            return prep
        tm = self._encode(instance.text)
        ann = instance.annotations
        qbar = tm.vectors if self.cfg.pool_mode == "summary" else tm.token_rows
        entity_ids = {e for e in (ann.subject_entity, ann.object_entity) if e is not None}
        selected_facts: list[int] = []
        summaries = np.zeros((0, qbar.shape[1]))
        if self.cfg.use_selector and entity_ids:
            pool = build_candidate_pool(
                self.kg, entity_ids, self.encoder, cap=self.cfg.pool_cap,
                text_cache=self._token_cache,
            )
            selection = select_spos(tm, pool, k=self.cfg.k_spo)
            if selection.m > 0:
                summaries = selection.summary_matrix()
                selected_facts = [self._fact_index[c.fact] for c in selection.selected]
        prep = PreparedQuestion(
            instance=instance,
            qbar=np.ascontiguousarray(qbar),
            spo_summaries=np.ascontiguousarray(summaries),
            selected_facts=selected_facts,
            s_row=self.emb.entity_row(ann.subject_entity),
            t_row=self.emb.timestamp_row(ann.timestamp),
            o_row=self.emb.entity_row(ann.object_entity),
            gold=gold_indices(ann, self.emb.num_entities, self.emb.num_timestamps),
        )
        self._prepared[instance.id] = prep
        return prep

    # -- numeric passes --------------------------------------------------

    def forward(self, prep: PreparedQuestion, grads: dict[str, np.ndarray] | None = None,
                include_tables: bool = False) -> ForwardOutput:
        """Loss + scores for one prepared question; accumulates gradients
        into ``grads`` (parameter names, optionally table names) when given."""
        qa = self.qa
        m = prep.spo_summaries.shape[0]
        skipped = m == 0

        if skipped:
            q_new = prep.qbar
            gates = None
        else:
            q_final, cache_q = multiway_forward(prep.qbar, prep.spo_summaries, qa.mw_q)
            s_hat, cache_s = multiway_forward(prep.spo_summaries, prep.qbar, qa.direction_s)
            q_new, gates, cache_f = adaptive_fuse_forward(
                q_final, s_hat, qa.fusion, adaptive=self.cfg.adaptive_gate)

        if self.cfg.pool_mode == "summary":
            pooled = q_new[0]
        else:
            pooled = q_new.mean(axis=0)

        ent_out = qa.proj.w_ent @ pooled + qa.proj.b_ent
        time_out = qa.proj.w_time @ pooled + qa.proj.b_time
        d_kg = self.emb.d_kg
        ent_scores, time_scores, cache_score = score_answers_rows(
            ent_out[:d_kg], ent_out[d_kg:], time_out[:d_kg], time_out[d_kg:],
            prep.s_row, prep.t_row, prep.o_row, self.emb,
        )
        scores = ScoreVector(entity_scores=ent_scores, time_scores=time_scores)
        value, d_concat = loss_and_score_grad(scores, prep.instance.annotations,
                                              with_grad=grads is not None)
        out = ForwardOutput(loss=value, scores=scores, gates=gates, fusion_skipped=skipped)
        if grads is None:
            return out

        n_ent = scores.num_entities
        dq_er, dq_ei, dq_tr, dq_ti = score_answers_backward(
            cache_score, d_concat[:n_ent], d_concat[n_ent:], self.emb,
            table_grads=grads if include_tables else None,
        )
        d_ent_out = np.concatenate([dq_er, dq_ei])
        d_time_out = np.concatenate([dq_tr, dq_ti])
        grads["qa.proj.w_ent"] += np.outer(d_ent_out, pooled)
        grads["qa.proj.b_ent"] += d_ent_out
        grads["qa.proj.w_time"] += np.outer(d_time_out, pooled)
        grads["qa.proj.b_time"] += d_time_out
        d_pooled = qa.proj.w_ent.T @ d_ent_out + qa.proj.w_time.T @ d_time_out

        n = q_new.shape[0]
        if self.cfg.pool_mode == "summary":
            d_q_new = np.zeros_like(q_new)
            d_q_new[0] = d_pooled
        else:
            d_q_new = np.tile(d_pooled / n, (n, 1))

        if not skipped:
            d_q_final, d_s_hat = adaptive_fuse_backward(cache_f, d_q_new, qa.fusion,
                                                        grads, "qa.fuse")
            multiway_backward(cache_q, d_q_final, qa.mw_q, grads, "qa.mw_q")
            multiway_backward(cache_s, d_s_hat, qa.direction_s, grads, qa.s_prefix)
        return out

    # -- prediction -------------------------------------------------------

    def predict_question(self, instance: QuestionInstance, top_k: int = 10) -> QuestionPrediction:
        prep = self.prepare(instance)
        out = self.forward(prep)
        ann = instance.annotations
        top = predict(out.scores, top_k)
        concat = out.scores.concatenated()
        n_ent = out.scores.num_entities
        top_scores = [
            float(concat[idx if kind == "entity" else n_ent + idx]) for kind, idx in top
        ]
        return QuestionPrediction(
            question_id=instance.id,
            category=ann.question_type,
            answer_type=ann.answer_type,
            rank=rank_of_best_gold(out.scores, ann),
            top=top,
            top_scores=top_scores,
            gate_mean=None if out.gates is None else float(out.gates.mean()),
            fusion_skipped=out.fusion_skipped,
            selected_facts=prep.selected_facts,
        )

    def inspect_question(self, instance: QuestionInstance) -> dict:
        """Interpretability dump: attention maps and per-token gates."""
        prep = self.prepare(instance)
        doc: dict = {
            "question_id": instance.id,
            "text": instance.text,
            "selected_facts": prep.selected_facts,
            "fusion_skipped": prep.spo_summaries.shape[0] == 0,
        }
        if prep.spo_summaries.shape[0] == 0:
            return doc
        from ..fusion import attention_forward

        maps = {}
        for name in self.qa.mw_q.branches:
            _, alpha, _ = attention_forward(name, prep.qbar, prep.spo_summaries,
                                            self.qa.mw_q.attn[name])
            maps[name] = alpha.tolist()
        q_final, _ = multiway_forward(prep.qbar, prep.spo_summaries, self.qa.mw_q)
        s_hat, _ = multiway_forward(prep.spo_summaries, prep.qbar, self.qa.direction_s)
        _, gates, _ = adaptive_fuse_forward(q_final, s_hat, self.qa.fusion,
                                            adaptive=self.cfg.adaptive_gate)
        doc["attention"] = maps
        doc["gates"] = gates.tolist()
        return doc
