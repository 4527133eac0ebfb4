"""Complex-valued temporal KG embeddings and their training loop.

A fact (s, p, o, t) is scored as the real part of the coordinate-wise
triple product with the object conjugated,

    score = Re(<e_s, e_p * e_t, conj(e_o)>),

where all four embeddings live in C^d, stored as split real/imaginary
float64 matrices.  Training minimizes softmax cross-entropy over the full
object vocabulary plus the symmetric subject-replacement term, with plain
L2 on the rows of each batch's positive tuples, optimized with Adam.

Entity and timestamp tables carry one reserved, trainable "dummy" row at
index 0 (used by the answer head when a question lacks an annotation), so
vocabulary id i lives in table row i + 1.  Candidate sweeps exclude the
dummy row.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import DivergenceError, InputError, ShapeError
from .kg import TemporalKG
from .optim import Adam

logger = logging.getLogger(__name__)

DUMMY_ROW = 0
ROW_OFFSET = 1  # vocabulary id -> table row for entities and timestamps

TABLE_FORMAT_VERSION = 1


@dataclass
class ComplexEmbeddingTable:
    """Split real/imaginary coefficient matrices of one embedding table."""

    real: np.ndarray
    imag: np.ndarray

    def __post_init__(self):
        self.real = np.ascontiguousarray(self.real, dtype=np.float64)
        self.imag = np.ascontiguousarray(self.imag, dtype=np.float64)
        if self.real.shape != self.imag.shape or self.real.ndim != 2:
            raise ShapeError(
                f"real/imag must be equal-shape matrices, got {self.real.shape} vs {self.imag.shape}"
            )

    @property
    def count(self) -> int:
        return self.real.shape[0]

    @property
    def width(self) -> int:
        return self.real.shape[1]

    def row(self, i: int) -> np.ndarray:
        """Row i as a complex128 vector."""
        return self.real[i] + 1j * self.imag[i]

    def as_complex(self) -> np.ndarray:
        return self.real + 1j * self.imag

    def copy(self) -> "ComplexEmbeddingTable":
        return ComplexEmbeddingTable(self.real.copy(), self.imag.copy())


@dataclass
class TkgEmbeddings:
    """Entity/predicate/timestamp tables for one KG.

    Entity and timestamp tables have one extra leading dummy row; the
    predicate table has none (predicates are never substituted by a dummy).
    """

    entities: ComplexEmbeddingTable
    predicates: ComplexEmbeddingTable
    timestamps: ComplexEmbeddingTable

    @property
    def d_kg(self) -> int:
        return self.entities.width

    @property
    def num_entities(self) -> int:
        return self.entities.count - ROW_OFFSET

    @property
    def num_timestamps(self) -> int:
        return self.timestamps.count - ROW_OFFSET

    def entity_row(self, entity_id: int | None) -> int:
        """Table row of an entity id; the dummy row when the id is None."""
        return DUMMY_ROW if entity_id is None else entity_id + ROW_OFFSET

    def timestamp_row(self, timestamp_id: int | None) -> int:
        return DUMMY_ROW if timestamp_id is None else timestamp_id + ROW_OFFSET

    def copy(self) -> "TkgEmbeddings":
        return TkgEmbeddings(self.entities.copy(), self.predicates.copy(), self.timestamps.copy())

    def params(self, prefix: str = "kg") -> dict[str, np.ndarray]:
        """Named parameter arrays (shared references, not copies)."""
        return {
            f"{prefix}.ent_real": self.entities.real,
            f"{prefix}.ent_imag": self.entities.imag,
            f"{prefix}.pred_real": self.predicates.real,
            f"{prefix}.pred_imag": self.predicates.imag,
            f"{prefix}.time_real": self.timestamps.real,
            f"{prefix}.time_imag": self.timestamps.imag,
        }


@dataclass
class TkgTrainConfig:
    """Desk-scale defaults; the source papers' pre-training settings are unknown."""

    d_kg: int = 64
    epochs: int = 200
    lr: float = 5e-2
    batch_size: int = 256
    l2: float = 1e-4
    init_scale: float = 0.1
    seed: int = 0
    log_every: int = 50


def init_embeddings(kg: TemporalKG, d_kg: int, init_scale: float, seed: int) -> TkgEmbeddings:
    """Seeded gaussian initialization, dummy rows included and trainable."""
    rng = np.random.default_rng(seed)

    def table(count: int) -> ComplexEmbeddingTable:
        return ComplexEmbeddingTable(
            init_scale * rng.standard_normal((count, d_kg)),
            init_scale * rng.standard_normal((count, d_kg)),
        )

    return TkgEmbeddings(
        entities=table(kg.num_entities + ROW_OFFSET),
        predicates=table(kg.num_predicates),
        timestamps=table(kg.num_timestamps + ROW_OFFSET),
    )


def _split(v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    v = np.asarray(v)
    if v.ndim != 1:
        raise ShapeError(f"expected 1-D complex vector, got shape {v.shape}")
    return (
        np.ascontiguousarray(v.real, dtype=np.float64),
        np.ascontiguousarray(v.imag, dtype=np.float64),
    )


def score_fact(e_s: np.ndarray, e_p: np.ndarray, e_o: np.ndarray, e_t: np.ndarray) -> float:
    """Re(<e_s, e_p * e_t, conj(e_o)>) for four complex vectors."""
    sr, si = _split(e_s)
    pr, pi = _split(e_p)
    or_, oi = _split(e_o)
    tr, ti = _split(e_t)
    if not (sr.shape == pr.shape == or_.shape == tr.shape):
        raise ShapeError(
            "embedding dimensions differ: "
            f"{sr.shape[0]}, {pr.shape[0]}, {or_.shape[0]}, {tr.shape[0]}"
        )
    return kernels.score_single(sr, si, pr, pi, tr, ti, or_, oi)


def score_all_objects(
    e_s: np.ndarray, e_p: np.ndarray, e_t: np.ndarray, entity_table: ComplexEmbeddingTable
) -> np.ndarray:
    """scores[j] = score_fact(e_s, e_p, entity_table row j, e_t) for every row."""
    sr, si = _split(e_s)
    pr, pi = _split(e_p)
    tr, ti = _split(e_t)
    if not (sr.shape == pr.shape == tr.shape) or sr.shape[0] != entity_table.width:
        raise ShapeError("embedding dimensions differ")
    w = (pr + 1j * pi) * (tr + 1j * ti)
    z = (sr + 1j * si) * w
    return kernels.sweep_conj(
        np.ascontiguousarray(z.real), np.ascontiguousarray(z.imag),
        entity_table.real, entity_table.imag,
    )


def expand_training_tuples(kg: TemporalKG) -> np.ndarray:
    """One (s_row, p_row, o_row, t_row) per fact and vocabulary timestamp
    inside the fact's closed interval; int64 array of shape (M, 4)."""
    rows = []
    for fact in kg.facts:
        for t_id in range(fact.t_start, fact.t_end + 1):
            rows.append(
                (fact.subject + ROW_OFFSET, fact.predicate, fact.object + ROW_OFFSET, t_id + ROW_OFFSET)
            )
    return np.asarray(rows, dtype=np.int64).reshape(-1, 4)


def _log_softmax(scores: np.ndarray) -> np.ndarray:
    m = scores.max(axis=1, keepdims=True)
    return scores - (m + np.log(np.exp(scores - m).sum(axis=1, keepdims=True)))


def tkg_batch_loss(emb: TkgEmbeddings, tuples: np.ndarray, l2: float,
                   grads: dict[str, np.ndarray] | None = None) -> float:
    """Mean loss of a tuple batch; optionally accumulate analytic gradients.

    Per tuple: 0.5 * (object-replacement CE + subject-replacement CE) over
    the real entity rows, plus l2 * sum of squared row norms of the four
    embeddings of the positive tuple.  ``grads``, when given, must hold
    zero-initialized arrays under the names of :meth:`TkgEmbeddings.params`.
    """
    if tuples.size == 0:
        raise InputError("empty tuple batch")
    b = tuples.shape[0]
    er, ei = emb.entities.real, emb.entities.imag
    cand_r, cand_i = er[ROW_OFFSET:], ei[ROW_OFFSET:]
    s_rows, p_rows, o_rows, t_rows = (tuples[:, i] for i in range(4))

    sr, si = er[s_rows], ei[s_rows]
    pr, pi = emb.predicates.real[p_rows], emb.predicates.imag[p_rows]
    or_, oi = er[o_rows], ei[o_rows]
    tr, ti = emb.timestamps.real[t_rows], emb.timestamps.imag[t_rows]

    wr = pr * tr - pi * ti
    wi = pr * ti + pi * tr

    # object side: z = s * w, candidates conjugated
    zr = sr * wr - si * wi
    zi = sr * wi + si * wr
    obj_scores = kernels.sweep_conj_batch(
        np.ascontiguousarray(zr), np.ascontiguousarray(zi), cand_r, cand_i
    )
    # subject side: u = w * conj(o), candidates plain
    ur = wr * or_ + wi * oi
    ui = wi * or_ - wr * oi
    subj_scores = kernels.sweep_plain_batch(
        np.ascontiguousarray(ur), np.ascontiguousarray(ui), cand_r, cand_i
    )

    gold_obj = o_rows - ROW_OFFSET
    gold_subj = s_rows - ROW_OFFSET
    obj_logp = _log_softmax(obj_scores)
    subj_logp = _log_softmax(subj_scores)
    ce = -0.5 * (obj_logp[np.arange(b), gold_obj] + subj_logp[np.arange(b), gold_subj])

    reg = (
        np.sum(sr * sr + si * si, axis=1)
        + np.sum(pr * pr + pi * pi, axis=1)
        + np.sum(or_ * or_ + oi * oi, axis=1)
        + np.sum(tr * tr + ti * ti, axis=1)
    )
    loss = float(np.mean(ce + l2 * reg))

    if grads is None:
        return loss

    scale = 0.5 / b
    g_obj = np.exp(obj_logp)
    g_obj[np.arange(b), gold_obj] -= 1.0
    g_obj *= scale
    g_subj = np.exp(subj_logp)
    g_subj[np.arange(b), gold_subj] -= 1.0
    g_subj *= scale

    ge_r, ge_i = grads["kg.ent_real"], grads["kg.ent_imag"]
    gp_r, gp_i = grads["kg.pred_real"], grads["kg.pred_imag"]
    gt_r, gt_i = grads["kg.time_real"], grads["kg.time_imag"]

    # candidate-table gradients (rank-b updates on the real rows)
    ge_r[ROW_OFFSET:] += g_obj.T @ zr + g_subj.T @ ur
    ge_i[ROW_OFFSET:] += g_obj.T @ zi - g_subj.T @ ui

    # object side, back through z = s * w
    dzr = g_obj @ cand_r
    dzi = g_obj @ cand_i
    dsr = dzr * wr + dzi * wi
    dsi = -dzr * wi + dzi * wr
    dwr = dzr * sr + dzi * si
    dwi = -dzr * si + dzi * sr

    # subject side, back through u = w * conj(o)
    dur = g_subj @ cand_r
    dui = -(g_subj @ cand_i)
    dwr += dur * or_ - dui * oi
    dwi += dur * oi + dui * or_
    dor = dur * wr + dui * wi
    doi = dur * wi - dui * wr

    # back through w = p * t
    dpr = dwr * tr + dwi * ti
    dpi = -dwr * ti + dwi * tr
    dtr = dwr * pr + dwi * pi
    dti = -dwr * pi + dwi * pr

    # L2 on the positive tuple's rows
    r = 2.0 * l2 / b
    dsr += r * sr
    dsi += r * si
    dpr += r * pr
    dpi += r * pi
    dor += r * or_
    doi += r * oi
    dtr += r * tr
    dti += r * ti

    np.add.at(ge_r, s_rows, dsr)
    np.add.at(ge_i, s_rows, dsi)
    np.add.at(ge_r, o_rows, dor)
    np.add.at(ge_i, o_rows, doi)
    np.add.at(gp_r, p_rows, dpr)
    np.add.at(gp_i, p_rows, dpi)
    np.add.at(gt_r, t_rows, dtr)
    np.add.at(gt_i, t_rows, dti)
    return loss


def object_hits_at_1(emb: TkgEmbeddings, tuples: np.ndarray) -> float:
    """Fraction of tuples whose gold object is the argmax of the object sweep."""
    er, ei = emb.entities.real, emb.entities.imag
    sr, si = er[tuples[:, 0]], ei[tuples[:, 0]]
    pr, pi = emb.predicates.real[tuples[:, 1]], emb.predicates.imag[tuples[:, 1]]
    tr, ti = emb.timestamps.real[tuples[:, 3]], emb.timestamps.imag[tuples[:, 3]]
    wr = pr * tr - pi * ti
    wi = pr * ti + pi * tr
    zr = np.ascontiguousarray(sr * wr - si * wi)
    zi = np.ascontiguousarray(sr * wi + si * wr)
    scores = kernels.sweep_conj_batch(zr, zi, er[ROW_OFFSET:], ei[ROW_OFFSET:])
    pred = scores.argmax(axis=1)
    return float(np.mean(pred == tuples[:, 2] - ROW_OFFSET))


def train_tkg(kg: TemporalKG, config: TkgTrainConfig) -> TkgEmbeddings:
    """Pre-train the embedding tables on the KG's expanded fact tuples.

    Deterministic under a fixed seed (one RNG drives init and batch order);
    raises DivergenceError if the loss goes non-finite.
    """
    if not kg.facts:
        raise InputError("cannot train on an empty KG")
    emb = init_embeddings(kg, config.d_kg, config.init_scale, config.seed)
    if config.epochs == 0:
        return emb

    tuples = expand_training_tuples(kg)
    rng = np.random.default_rng(config.seed + 1)
    params = emb.params()
    opt = Adam(params, lr=config.lr)

    for epoch in range(config.epochs):
        order = rng.permutation(len(tuples))
        epoch_loss = 0.0
        for start in range(0, len(order), config.batch_size):
            batch = tuples[order[start:start + config.batch_size]]
            grads = {k: np.zeros_like(v) for k, v in params.items()}
            loss = tkg_batch_loss(emb, batch, config.l2, grads)
            if not np.isfinite(loss):
                raise DivergenceError(
                    f"non-finite KG loss at epoch {epoch}, batch offset {start}"
                )
            opt.step(grads)
            epoch_loss += loss * len(batch)
        if config.log_every and (epoch + 1) % config.log_every == 0:
            logger.info(
                "kg epoch %d/%d loss %.4f hits@1 %.3f",
                epoch + 1, config.epochs, epoch_loss / len(tuples),
                object_hits_at_1(emb, tuples),
            )
    return emb


def save_tables(path, emb: TkgEmbeddings, extra: dict | None = None) -> None:
    """Write the six coefficient matrices to an npz archive (bit-exact)."""
    meta = {"format_version": TABLE_FORMAT_VERSION, "d_kg": emb.d_kg}
    if extra:
        meta.update(extra)
    np.savez(
        path,
        meta=np.array(json.dumps(meta, sort_keys=True)),
        ent_real=emb.entities.real, ent_imag=emb.entities.imag,
        pred_real=emb.predicates.real, pred_imag=emb.predicates.imag,
        time_real=emb.timestamps.real, time_imag=emb.timestamps.imag,
    )


def load_tables(path) -> tuple[TkgEmbeddings, dict]:
    """Load an archive written by :func:`save_tables`; returns (tables, meta)."""
    with np.load(path, allow_pickle=False) as npz:
        meta = json.loads(str(npz["meta"]))
        if meta.get("format_version") != TABLE_FORMAT_VERSION:
            raise InputError(
                f"unsupported table archive version {meta.get('format_version')!r}"
            )
        emb = TkgEmbeddings(
            entities=ComplexEmbeddingTable(npz["ent_real"], npz["ent_imag"]),
            predicates=ComplexEmbeddingTable(npz["pred_real"], npz["pred_imag"]),
            timestamps=ComplexEmbeddingTable(npz["time_real"], npz["time_imag"]),
        )
    return emb, meta
