"""Hits@k evaluation with per-type breakdowns.

The report mirrors the benchmark's table structure: overall Hits@k plus
cells by question type (complex/simple), answer type (entity/time) and
the five reasoning categories.  A question's rank is the best rank of any
of its gold answers; cells with no questions are marked empty (None).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..answer import CATEGORIES, COMPLEX_CATEGORIES
from ..errors import InputError
from .data import QuestionInstance
from .model import QaModel, QuestionPrediction


def hits_at_k(rank_of_first_gold: int, k: int) -> int:
    """1 iff the best gold rank is within the top k."""
    if rank_of_first_gold < 1:
        raise InputError(f"rank must be >= 1, got {rank_of_first_gold}")
    if k < 1:
        raise InputError(f"k must be >= 1, got {k}")
    return 1 if rank_of_first_gold <= k else 0


@dataclass
class Cell:
    """One report cell: question count and Hits@k per k (None when empty)."""

    count: int = 0
    hits: dict[int, float | None] = field(default_factory=dict)


@dataclass
class MetricsReport:
    ks: tuple[int, ...]
    overall: Cell
    question_type: dict[str, Cell]
    answer_type: dict[str, Cell]
    category: dict[str, Cell]

    def to_dict(self) -> dict:
        def celld(cell: Cell) -> dict:
            return {"count": cell.count, "hits": {str(k): v for k, v in cell.hits.items()}}

        return {
            "ks": list(self.ks),
            "overall": celld(self.overall),
            "question_type": {k: celld(v) for k, v in self.question_type.items()},
            "answer_type": {k: celld(v) for k, v in self.answer_type.items()},
            "category": {k: celld(v) for k, v in self.category.items()},
        }

    def format_table(self) -> str:
        rows = [("overall", self.overall)]
        rows += [(f"question_type/{k}", v) for k, v in self.question_type.items()]
        rows += [(f"answer_type/{k}", v) for k, v in self.answer_type.items()]
        rows += [(f"category/{k}", v) for k, v in self.category.items()]
        width = max(len(name) for name, _ in rows)
        header = "cell".ljust(width) + "  count" + "".join(f"  hits@{k:<4d}" for k in self.ks)
        lines = [header, "-" * len(header)]
        for name, cell in rows:
            vals = "".join(
                f"  {cell.hits[k]:.4f}  " if cell.hits[k] is not None else "       -  "
                for k in self.ks
            )
            lines.append(name.ljust(width) + f"  {cell.count:5d}" + vals)
        return "\n".join(lines)


def _cell(ranks: list[int], ks: tuple[int, ...]) -> Cell:
    if not ranks:
        return Cell(count=0, hits={k: None for k in ks})
    arr = np.asarray(ranks)
    return Cell(count=len(ranks), hits={k: float(np.mean(arr <= k)) for k in ks})


def build_report(predictions: list[QuestionPrediction], ks: tuple[int, ...] = (1, 10)) -> MetricsReport:
    by_qtype: dict[str, list[int]] = {"complex": [], "simple": []}
    by_atype: dict[str, list[int]] = {"entity": [], "time": []}
    by_cat: dict[str, list[int]] = {c: [] for c in CATEGORIES}
    all_ranks: list[int] = []
    for pred in predictions:
        all_ranks.append(pred.rank)
        qtype = "complex" if pred.category in COMPLEX_CATEGORIES else "simple"
        by_qtype[qtype].append(pred.rank)
        by_atype[pred.answer_type].append(pred.rank)
        by_cat[pred.category].append(pred.rank)
    return MetricsReport(
        ks=tuple(ks),
        overall=_cell(all_ranks, ks),
        question_type={k: _cell(v, ks) for k, v in by_qtype.items()},
        answer_type={k: _cell(v, ks) for k, v in by_atype.items()},
        category={k: _cell(v, ks) for k, v in by_cat.items()},
    )


def evaluate(model: QaModel, questions: list[QuestionInstance],
             ks: tuple[int, ...] = (1, 10), top_k: int = 10
             ) -> tuple[MetricsReport, list[QuestionPrediction]]:
    """Deterministic evaluation of frozen model parameters on a question set."""
    predictions = [model.predict_question(q, top_k=top_k) for q in questions]
    return build_report(predictions, ks), predictions


def hits1(model: QaModel, questions: list[QuestionInstance]) -> float:
    """Overall Hits@1 only (the early-stopping metric)."""
    if not questions:
        return 0.0
    from ..answer import rank_of_best_gold

    total = 0
    for q in questions:
        prep = model.prepare(q)
        out = model.forward(prep)
        total += hits_at_k(rank_of_best_gold(out.scores, q.annotations), 1)
    return total / len(questions)
