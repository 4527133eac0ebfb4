"""Temporal knowledge-graph question answering.

Pipeline: select candidate facts for a question by summary-vector cosine,
match question tokens against them with three attention flavors, gate the
matched knowledge into the question representation, and score every
entity and timestamp with complex-valued KG embeddings.
"""

__version__ = "0.1.0"

from .kg import TemporalFact, TemporalKG, facts_for_entities, load_kg, verbalize_fact
from .tcomplex import (
    ComplexEmbeddingTable,
    TkgEmbeddings,
    TkgTrainConfig,
    score_all_objects,
    score_fact,
    train_tkg,
)

__all__ = [
    "TemporalFact",
    "TemporalKG",
    "facts_for_entities",
    "load_kg",
    "verbalize_fact",
    "ComplexEmbeddingTable",
    "TkgEmbeddings",
    "TkgTrainConfig",
    "score_fact",
    "score_all_objects",
    "train_tkg",
    "__version__",
]
