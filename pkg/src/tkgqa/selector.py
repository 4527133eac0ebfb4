"""Candidate fact selection by summary-vector cosine similarity.

A question and every verbalized candidate fact are encoded with the same
(shared, zero-shot) encoder; candidates are ranked by cosine similarity of
the summary vectors and the top k = 10 survive.  Pure functions, safe for
concurrent use.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .encoders import TokenMatrix
from .errors import ShapeError
from .kg import TemporalFact, TemporalKG, facts_for_entities, verbalize_fact

DEFAULT_K = 10
DEFAULT_POOL_CAP = 200


@dataclass
class SpoCandidate:
    """A verbalized fact, its summary vector, and its selection score."""

    fact: TemporalFact
    text: str
    summary_vec: np.ndarray
    score: float = 0.0


@dataclass
class SpoSelection:
    """Ranked selection result: ``selected`` has m <= k entries."""

    selected: list[SpoCandidate]
    k: int
    pool_size: int = 0

    @property
    def m(self) -> int:
        return len(self.selected)

    def mask(self) -> np.ndarray:
        """Boolean length-k mask whose first m entries are True."""
        return np.arange(self.k) < self.m

    def summary_matrix(self) -> np.ndarray:
        """(m, d_txt) matrix of the selected summary vectors."""
        if not self.selected:
            return np.zeros((0, 0))
        return np.stack([c.summary_vec for c in self.selected])


def cosine_score(u: np.ndarray, v: np.ndarray) -> float:
    """u.v / (|u||v|), defined as 0.0 (with a warning) when either is zero."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape or u.ndim != 1:
        raise ShapeError(f"cosine inputs must be equal-length vectors, got {u.shape} vs {v.shape}")
    nu = np.linalg.norm(u)
    nv = np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        warnings.warn("cosine_score of a zero vector defined as 0.0", stacklevel=2)
        return 0.0
    return float(np.clip(np.dot(u, v) / (nu * nv), -1.0, 1.0))


def select_spos(
    question: TokenMatrix, candidates: list[SpoCandidate], k: int = DEFAULT_K
) -> SpoSelection:
    """Top-k candidates by cosine of summary vectors against the question.

    Descending score; ties broken by ascending original candidate index
    (stable).  Candidates' ``score`` fields are filled in place.
    """
    q = question.summary
    for cand in candidates:
        cand.score = cosine_score(q, cand.summary_vec)
    order = sorted(range(len(candidates)), key=lambda i: (-candidates[i].score, i))
    return SpoSelection(
        selected=[candidates[i] for i in order[:k]], k=k, pool_size=len(candidates)
    )


def build_candidate_pool(
    kg: TemporalKG,
    entity_ids: set[int],
    encoder,
    cap: int = DEFAULT_POOL_CAP,
    text_cache: dict[str, TokenMatrix] | None = None,
) -> list[SpoCandidate]:
    """Facts touching any annotated entity, capped by descending t_end recency.

    The cap keeps scoring tractable on dense KGs; ordering within equal
    t_end follows fact-list order so the pool is deterministic.
    """
    pool = facts_for_entities(kg, entity_ids)
    if len(pool) > cap:
        order = sorted(range(len(pool)), key=lambda i: (-kg.year_of(pool[i].t_end), i))
        pool = [pool[i] for i in order[:cap]]
    candidates = []
    for fact in pool:
        text = verbalize_fact(fact, kg)
        if text_cache is not None and text in text_cache:
            tm = text_cache[text]
        else:
            tm = encoder.encode(text)
            if text_cache is not None:
                text_cache[text] = tm
        candidates.append(SpoCandidate(fact=fact, text=text, summary_vec=tm.summary))
    return candidates
