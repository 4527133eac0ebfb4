"""Answer prediction head.

Pools the fused question tokens, projects the pooled vector to an
entity-specific and a time-specific complex query vector, scores every
entity and every timestamp with the complex triple-product (subject and
timestamp rows coming from the question's annotations, the reserved dummy
row 0 standing in for missing annotations), and turns the concatenated
score vector into softmax probabilities for the cross-entropy loss.

Backward helpers accumulate gradients for the projection parameters and,
when requested, the embedding-table rows (for KG fine-tuning and gradient
checks).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import InputError, ShapeError
from .tcomplex import ROW_OFFSET, TkgEmbeddings

CATEGORIES = ("simple_entity", "simple_time", "before_after", "first_last", "time_join")
COMPLEX_CATEGORIES = ("before_after", "first_last", "time_join")
SIMPLE_CATEGORIES = ("simple_entity", "simple_time")
ANSWER_TYPES = ("entity", "time")


@dataclass
class QuestionAnnotations:
    """Entities/timestamp extracted from a question plus its gold answers.

    ``gold_answers`` holds entity ids or timestamp ids, homogeneous with
    ``answer_type``.
    """

    gold_answers: tuple[int, ...]
    question_type: str
    answer_type: str
    subject_entity: int | None = None
    object_entity: int | None = None
    timestamp: int | None = None

    def __post_init__(self):
        if self.question_type not in CATEGORIES:
            raise InputError(f"unknown question type {self.question_type!r}")
        if self.answer_type not in ANSWER_TYPES:
            raise InputError(f"unknown answer type {self.answer_type!r}")
        if not self.gold_answers:
            raise InputError("gold answer set must be non-empty")

    @property
    def is_complex(self) -> bool:
        return self.question_type in COMPLEX_CATEGORIES


@dataclass
class ScoreVector:
    """Scores over all entities then all timestamps."""

    entity_scores: np.ndarray
    time_scores: np.ndarray

    def __post_init__(self):
        if not (np.isfinite(self.entity_scores).all() and np.isfinite(self.time_scores).all()):
            raise InputError("score vector contains non-finite entries")

    @property
    def num_entities(self) -> int:
        return self.entity_scores.shape[0]

    @property
    def num_timestamps(self) -> int:
        return self.time_scores.shape[0]

    def concatenated(self) -> np.ndarray:
        return np.concatenate([self.entity_scores, self.time_scores])


@dataclass
class ProjectionParams:
    """Linear maps d_txt -> 2*d_kg for the entity and time query vectors.

    The first d_kg output coordinates are the real part, the last d_kg the
    imaginary part.
    """

    w_ent: np.ndarray
    b_ent: np.ndarray
    w_time: np.ndarray
    b_time: np.ndarray

    def params(self, prefix: str) -> dict[str, np.ndarray]:
        return {
            f"{prefix}.w_ent": self.w_ent,
            f"{prefix}.b_ent": self.b_ent,
            f"{prefix}.w_time": self.w_time,
            f"{prefix}.b_time": self.b_time,
        }


def init_projection(d_txt: int, d_kg: int, rng: np.random.Generator) -> ProjectionParams:
    bound = 1.0 / np.sqrt(d_txt)
    return ProjectionParams(
        w_ent=rng.uniform(-bound, bound, size=(2 * d_kg, d_txt)),
        b_ent=np.zeros(2 * d_kg),
        w_time=rng.uniform(-bound, bound, size=(2 * d_kg, d_txt)),
        b_time=np.zeros(2 * d_kg),
    )


def pool_question(q_new: np.ndarray) -> np.ndarray:
    """Arithmetic mean over token rows."""
    if q_new.ndim != 2 or q_new.shape[0] == 0:
        raise ShapeError(f"expected (n>=1, d) matrix, got {q_new.shape}")
    return q_new.mean(axis=0)


def project(q: np.ndarray, params: ProjectionParams) -> tuple[np.ndarray, np.ndarray]:
    """Pooled vector -> (q_ent, q_time) complex query vectors."""
    d_kg2 = params.w_ent.shape[0]
    if params.w_ent.shape[1] != q.shape[0]:
        raise ShapeError(f"projection expects input width {params.w_ent.shape[1]}, got {q.shape}")
    ent = params.w_ent @ q + params.b_ent
    time = params.w_time @ q + params.b_time
    half = d_kg2 // 2
    return ent[:half] + 1j * ent[half:], time[:half] + 1j * time[half:]


def _annotation_rows(ann: QuestionAnnotations, emb: TkgEmbeddings) -> tuple[int, int, int]:
    """(subject row, timestamp row, object row), dummies for missing slots.

    The Eq.-10 object is the first annotated non-subject entity; when the
    question annotates no second entity the dummy row stands in.
    """
    s_row = emb.entity_row(ann.subject_entity)
    t_row = emb.timestamp_row(ann.timestamp)
    o_row = emb.entity_row(ann.object_entity)
    return s_row, t_row, o_row


def score_answers_rows(
    q_ent_r: np.ndarray, q_ent_i: np.ndarray, q_time_r: np.ndarray, q_time_i: np.ndarray,
    s_row: int, t_row: int, o_row: int, emb: TkgEmbeddings,
):
    """Row-level scoring shared by the public op and the training path.

    Returns (entity_scores, time_scores, cache).
    """
    er, ei = emb.entities.real, emb.entities.imag
    tr_tab, ti_tab = emb.timestamps.real, emb.timestamps.imag
    sr, si = er[s_row], ei[s_row]
    tr, ti = tr_tab[t_row], ti_tab[t_row]
    or_, oi = er[o_row], ei[o_row]

    # entity sweep: z = (e_s * e_t) * q_ent against conjugated entity rows
    c1r = sr * tr - si * ti
    c1i = sr * ti + si * tr
    zr = c1r * q_ent_r - c1i * q_ent_i
    zi = c1r * q_ent_i + c1i * q_ent_r
    entity_scores = kernels.sweep_conj(
        np.ascontiguousarray(zr), np.ascontiguousarray(zi),
        er[ROW_OFFSET:], ei[ROW_OFFSET:],
    )

    # time sweep: u = (e_s * conj(e_o)) * q_time against plain timestamp rows
    c2r = sr * or_ + si * oi
    c2i = si * or_ - sr * oi
    ur = c2r * q_time_r - c2i * q_time_i
    ui = c2r * q_time_i + c2i * q_time_r
    time_scores = kernels.sweep_plain(
        np.ascontiguousarray(ur), np.ascontiguousarray(ui),
        tr_tab[ROW_OFFSET:], ti_tab[ROW_OFFSET:],
    )
    cache = (q_ent_r, q_ent_i, q_time_r, q_time_i, s_row, t_row, o_row,
             c1r, c1i, zr, zi, c2r, c2i, ur, ui)
    return entity_scores, time_scores, cache


def score_answers_backward(
    cache, d_ent: np.ndarray, d_time: np.ndarray, emb: TkgEmbeddings,
    table_grads: dict[str, np.ndarray] | None = None,
):
    """Backward of the two sweeps.

    Returns gradients for the four query-vector halves; accumulates table
    gradients (candidate rows plus the annotation rows) when a grad dict
    under :meth:`TkgEmbeddings.params` names is supplied.
    """
    (q_ent_r, q_ent_i, q_time_r, q_time_i, s_row, t_row, o_row,
     c1r, c1i, zr, zi, c2r, c2i, ur, ui) = cache
    er, ei = emb.entities.real, emb.entities.imag
    tr_tab, ti_tab = emb.timestamps.real, emb.timestamps.imag
    sr, si = er[s_row], ei[s_row]
    tr, ti = tr_tab[t_row], ti_tab[t_row]
    or_, oi = er[o_row], ei[o_row]

    dzr = d_ent @ er[ROW_OFFSET:]
    dzi = d_ent @ ei[ROW_OFFSET:]
    dq_ent_r = dzr * c1r + dzi * c1i
    dq_ent_i = -dzr * c1i + dzi * c1r

    dur = d_time @ tr_tab[ROW_OFFSET:]
    dui = -(d_time @ ti_tab[ROW_OFFSET:])
    dq_time_r = dur * c2r + dui * c2i
    dq_time_i = -dur * c2i + dui * c2r

    if table_grads is not None:
        ge_r, ge_i = table_grads["kg.ent_real"], table_grads["kg.ent_imag"]
        gt_r, gt_i = table_grads["kg.time_real"], table_grads["kg.time_imag"]
        # candidate rows
        ge_r[ROW_OFFSET:] += np.outer(d_ent, zr)
        ge_i[ROW_OFFSET:] += np.outer(d_ent, zi)
        gt_r[ROW_OFFSET:] += np.outer(d_time, ur)
        gt_i[ROW_OFFSET:] -= np.outer(d_time, ui)
        # annotation rows through c1 = e_s * e_t and c2 = e_s * conj(e_o)
        dc1r = dzr * q_ent_r + dzi * q_ent_i
        dc1i = -dzr * q_ent_i + dzi * q_ent_r
        dc2r = dur * q_time_r + dui * q_time_i
        dc2i = -dur * q_time_i + dui * q_time_r
        ds_r = dc1r * tr + dc1i * ti + dc2r * or_ - dc2i * oi
        ds_i = -dc1r * ti + dc1i * tr + dc2r * oi + dc2i * or_
        dt_r = dc1r * sr + dc1i * si
        dt_i = -dc1r * si + dc1i * sr
        do_r = dc2r * sr + dc2i * si
        do_i = dc2r * si - dc2i * sr
        ge_r[s_row] += ds_r
        ge_i[s_row] += ds_i
        gt_r[t_row] += dt_r
        gt_i[t_row] += dt_i
        ge_r[o_row] += do_r
        ge_i[o_row] += do_i
    return dq_ent_r, dq_ent_i, dq_time_r, dq_time_i


def score_answers(q_ent: np.ndarray, q_time: np.ndarray, ann: QuestionAnnotations,
                  emb: TkgEmbeddings) -> ScoreVector:
    """Score every entity and every timestamp for one question."""
    if q_ent.shape != (emb.d_kg,) or q_time.shape != (emb.d_kg,):
        raise ShapeError(f"query vectors must have shape ({emb.d_kg},)")
    s_row, t_row, o_row = _annotation_rows(ann, emb)
    ent, time, _ = score_answers_rows(
        np.ascontiguousarray(q_ent.real), np.ascontiguousarray(q_ent.imag),
        np.ascontiguousarray(q_time.real), np.ascontiguousarray(q_time.imag),
        s_row, t_row, o_row, emb,
    )
    return ScoreVector(entity_scores=ent, time_scores=time)


def gold_indices(ann: QuestionAnnotations, num_entities: int, num_timestamps: int) -> np.ndarray:
    """Gold answers as indices into the concatenated score vector."""
    ids = np.asarray(ann.gold_answers, dtype=np.int64)
    if ann.answer_type == "entity":
        if ids.min() < 0 or ids.max() >= num_entities:
            raise InputError(f"gold entity id out of range 0..{num_entities - 1}")
        return ids
    if ids.min() < 0 or ids.max() >= num_timestamps:
        raise InputError(f"gold timestamp id out of range 0..{num_timestamps - 1}")
    return ids + num_entities


def _log_softmax(scores: np.ndarray) -> np.ndarray:
    m = scores.max()
    return scores - (m + np.log(np.exp(scores - m).sum()))


def loss(scores: ScoreVector, ann: QuestionAnnotations) -> float:
    """Mean negative log softmax probability of the gold answers."""
    value, _ = loss_and_score_grad(scores, ann, with_grad=False)
    return value


def loss_and_score_grad(scores: ScoreVector, ann: QuestionAnnotations,
                        with_grad: bool = True):
    """Loss plus (optionally) its gradient w.r.t. the concatenated scores."""
    concat = scores.concatenated()
    gold = gold_indices(ann, scores.num_entities, scores.num_timestamps)
    logp = _log_softmax(concat)
    value = float(-logp[gold].mean())
    if not with_grad:
        return value, None
    d_scores = np.exp(logp)
    np.add.at(d_scores, gold, -1.0 / len(gold))
    return value, d_scores


def predict(scores: ScoreVector, k: int) -> list[tuple[str, int]]:
    """Top-k answers as ("entity" | "time", id), descending score,
    ties broken by ascending concatenated index."""
    concat = scores.concatenated()
    order = np.argsort(-concat, kind="stable")[:k]
    n_ent = scores.num_entities
    return [
        ("entity", int(i)) if i < n_ent else ("time", int(i - n_ent))
        for i in order
    ]


def rank_of_best_gold(scores: ScoreVector, ann: QuestionAnnotations) -> int:
    """1-based rank of the best-ranked gold answer under the predict order."""
    concat = scores.concatenated()
    gold = gold_indices(ann, scores.num_entities, scores.num_timestamps)
    order = np.argsort(-concat, kind="stable")
    position = np.empty_like(order)
    position[order] = np.arange(1, len(order) + 1)
    return int(position[gold].min())
