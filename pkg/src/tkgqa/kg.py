"""Temporal knowledge-graph store.

Holds the entity/predicate/timestamp vocabularies and the fact set, and
provides fact verbalization and per-entity fact lookup.  Instances are
immutable after load and safe for concurrent readers.

File formats (all UTF-8 TSV):

* fact file: one fact per line, ``subject \\t predicate \\t object \\t
  start_year \\t end_year``, names in the subject/predicate/object slots;
* optional sidecar name tables for entities and predicates, ``id \\t name``
  with non-negative integer ids.  When given, they pin the id assignment
  and unknown fact names raise :class:`VocabularyError`; without them ids
  are assigned by first appearance in the fact file.

Timestamp ids always follow ascending year order.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ParseError, VocabularyError

logger = logging.getLogger(__name__)


@dataclass(frozen=True, order=True)
class TemporalFact:
    """One (subject, predicate, object, t_start, t_end) quadruple of ids."""

    subject: int
    predicate: int
    object: int
    t_start: int
    t_end: int


@dataclass
class TemporalKG:
    """Entity/predicate/timestamp vocabularies plus the deduplicated fact list.

    ``entities`` and ``predicates`` map id -> name with ids 0..count-1;
    ``timestamps`` maps id -> year with years strictly increasing in id order.
    """

    entities: list[str] = field(default_factory=list)
    predicates: list[str] = field(default_factory=list)
    timestamps: list[int] = field(default_factory=list)
    facts: list[TemporalFact] = field(default_factory=list)

    @property
    def num_entities(self) -> int:
        return len(self.entities)

    @property
    def num_predicates(self) -> int:
        return len(self.predicates)

    @property
    def num_timestamps(self) -> int:
        return len(self.timestamps)

    def year_of(self, timestamp_id: int) -> int:
        return self.timestamps[timestamp_id]

    def timestamp_id_of(self, year: int) -> int:
        """Id of an exact year in the vocabulary; VocabularyError if absent."""
        try:
            return self._year_index[year]
        except KeyError:
            raise VocabularyError(f"year {year} not in timestamp vocabulary") from None

    def entity_id_of(self, name: str) -> int:
        try:
            return self._entity_index[name]
        except KeyError:
            raise VocabularyError(f"unknown entity name {name!r}") from None

    def predicate_id_of(self, name: str) -> int:
        try:
            return self._predicate_index[name]
        except KeyError:
            raise VocabularyError(f"unknown predicate name {name!r}") from None

    def __post_init__(self):
        self._entity_index = {name: i for i, name in enumerate(self.entities)}
        self._predicate_index = {name: i for i, name in enumerate(self.predicates)}
        self._year_index = {year: i for i, year in enumerate(self.timestamps)}
        self.validate()

    def validate(self) -> None:
        """Check the type invariants; raise VocabularyError/ParseError on failure."""
        years = self.timestamps
        if any(b <= a for a, b in zip(years, years[1:])):
            raise ParseError("timestamp table must be strictly increasing")
        for fact in self.facts:
            if not (0 <= fact.subject < len(self.entities)):
                raise VocabularyError(f"fact references unknown entity id {fact.subject}")
            if not (0 <= fact.object < len(self.entities)):
                raise VocabularyError(f"fact references unknown entity id {fact.object}")
            if not (0 <= fact.predicate < len(self.predicates)):
                raise VocabularyError(f"fact references unknown predicate id {fact.predicate}")
            for t in (fact.t_start, fact.t_end):
                if not (0 <= t < len(years)):
                    raise VocabularyError(f"fact references unknown timestamp id {t}")
            if years[fact.t_start] > years[fact.t_end]:
                raise ParseError(
                    f"fact interval reversed: {years[fact.t_start]} > {years[fact.t_end]}"
                )
        if len(set(self.facts)) != len(self.facts):
            raise ParseError("fact list contains duplicate quadruples")


def _read_name_table(path: str | Path) -> dict[int, str]:
    table: dict[int, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise ParseError(f"{path}: line {lineno}: expected 'id<TAB>name'")
            try:
                idx = int(parts[0])
            except ValueError:
                raise ParseError(f"{path}: line {lineno}: id {parts[0]!r} is not an integer") from None
            if idx < 0:
                raise ParseError(f"{path}: line {lineno}: id must be non-negative")
            if idx in table:
                raise ParseError(f"{path}: line {lineno}: duplicate id {idx}")
            table[idx] = parts[1]
    if table and sorted(table) != list(range(len(table))):
        raise ParseError(f"{path}: ids must cover 0..{len(table) - 1} without gaps")
    return table


def load_kg(
    path: str | Path,
    entities_path: str | Path | None = None,
    predicates_path: str | Path | None = None,
) -> TemporalKG:
    """Load a temporal KG from a fact TSV plus optional sidecar name tables.

    Duplicate fact lines are deduplicated silently (the fact set is a set);
    the dropped count is logged.  Malformed lines raise ParseError naming
    the line number; names missing from a provided sidecar table raise
    VocabularyError.
    """
    pinned_entities = _read_name_table(entities_path) if entities_path else None
    pinned_predicates = _read_name_table(predicates_path) if predicates_path else None

    entity_ids: dict[str, int] = (
        {name: i for i, name in pinned_entities.items()} if pinned_entities else {}
    )
    predicate_ids: dict[str, int] = (
        {name: i for i, name in pinned_predicates.items()} if pinned_predicates else {}
    )

    def resolve(name: str, ids: dict[str, int], pinned: bool, kind: str, lineno: int) -> int:
        if name in ids:
            return ids[name]
        if pinned:
            raise VocabularyError(
                f"{path}: line {lineno}: {kind} name {name!r} missing from name table"
            )
        ids[name] = len(ids)
        return ids[name]

    raw_facts: list[tuple[int, int, int, int, int]] = []
    years: set[int] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 5:
                raise ParseError(f"{path}: line {lineno}: expected 5 tab-separated fields, got {len(parts)}")
            s_name, p_name, o_name, start_s, end_s = parts
            try:
                start, end = int(start_s), int(end_s)
            except ValueError:
                raise ParseError(f"{path}: line {lineno}: years must be integers") from None
            if start > end:
                raise ParseError(f"{path}: line {lineno}: start year {start} after end year {end}")
            s = resolve(s_name, entity_ids, pinned_entities is not None, "entity", lineno)
            o = resolve(o_name, entity_ids, pinned_entities is not None, "entity", lineno)
            p = resolve(p_name, predicate_ids, pinned_predicates is not None, "predicate", lineno)
            raw_facts.append((s, p, o, start, end))
            years.update((start, end))

    timestamps = sorted(years)
    year_to_id = {year: i for i, year in enumerate(timestamps)}

    facts: list[TemporalFact] = []
    seen: set[TemporalFact] = set()
    dropped = 0
    for s, p, o, start, end in raw_facts:
        fact = TemporalFact(s, p, o, year_to_id[start], year_to_id[end])
        if fact in seen:
            dropped += 1
            continue
        seen.add(fact)
        facts.append(fact)
    if dropped:
        logger.info("deduplicated %d repeated fact line(s) in %s", dropped, path)

    def names_from(ids: dict[str, int]) -> list[str]:
        out = [""] * len(ids)
        for name, i in ids.items():
            out[i] = name
        return out

    return TemporalKG(
        entities=names_from(entity_ids),
        predicates=names_from(predicate_ids),
        timestamps=timestamps,
        facts=facts,
    )


def save_kg(kg: TemporalKG, path: str | Path,
            entities_path: str | Path | None = None,
            predicates_path: str | Path | None = None) -> None:
    """Write the fact TSV (and optional sidecar name tables) for a KG."""
    with open(path, "w", encoding="utf-8") as fh:
        for fact in kg.facts:
            fh.write(
                f"{kg.entities[fact.subject]}\t{kg.predicates[fact.predicate]}\t"
                f"{kg.entities[fact.object]}\t{kg.timestamps[fact.t_start]}\t"
                f"{kg.timestamps[fact.t_end]}\n"
            )
    if entities_path is not None:
        with open(entities_path, "w", encoding="utf-8") as fh:
            for i, name in enumerate(kg.entities):
                fh.write(f"{i}\t{name}\n")
    if predicates_path is not None:
        with open(predicates_path, "w", encoding="utf-8") as fh:
            for i, name in enumerate(kg.predicates):
                fh.write(f"{i}\t{name}\n")


def verbalize_fact(fact: TemporalFact, kg: TemporalKG) -> str:
    """Deterministic text surface of a fact.

    ``"{subject} {predicate} {object} from {start} to {end}"``, collapsing
    to ``"... in {year}"`` for degenerate intervals.
    """
    subject = kg.entities[fact.subject]
    predicate = kg.predicates[fact.predicate]
    obj = kg.entities[fact.object]
    start = kg.timestamps[fact.t_start]
    end = kg.timestamps[fact.t_end]
    if start == end:
        return f"{subject} {predicate} {obj} in {start}"
    return f"{subject} {predicate} {obj} from {start} to {end}"


def facts_for_entities(kg: TemporalKG, entity_ids: set[int]) -> list[TemporalFact]:
    """All facts whose subject or object is in the set, in fact-list order."""
    for e in entity_ids:
        if not (0 <= e < kg.num_entities):
            raise VocabularyError(f"unknown entity id {e}")
    return [f for f in kg.facts if f.subject in entity_ids or f.object in entity_ids]
