"""Desk-scale synthetic temporal KG and question benchmark.

World model: persons hold offices.  An office is a (predicate, group)
pair with a chain of non-overlapping terms, e.g.

    person07 leader group02 from 1994 to 1996

Chains never overlap inside an office, successive holders differ, and one
person never holds two offices in overlapping years, so category answers
are well defined.  Questions come from five templates:

    simple_entity  "who was {p} of {o} in {t}"
    simple_time    "when was {s} the {p} of {o}"
    before_after   "who was the {p} of {o} before {s}"  (or after)
    first_last     "who was the first {p} of {o}"       (or last)
    time_join      "who was {p} of {o} when {s2} was {p2} of {o2}"

Gold answers are computed exactly from the generated fact set by the scan
helpers below (the test suite re-derives them with an independent scan).
Intervals are closed; "before"/"after" mean the immediately adjacent term;
time answers are the vocabulary timestamps inside the matching intervals.
Everything is deterministic under (config, seed).
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

import numpy as np

from ..answer import QuestionAnnotations
from ..config import SynthSection
from ..errors import ConfigError
from ..kg import TemporalFact, TemporalKG
from .data import QuestionInstance, question_to_record

_PREDICATE_WORDS = ("leader", "captain", "chair", "director", "manager", "curator",
                    "treasurer", "editor")


@dataclass
class SyntheticDataset:
    kg: TemporalKG
    train: list[QuestionInstance]
    valid: list[QuestionInstance]
    test: list[QuestionInstance]

    @property
    def all_questions(self) -> list[QuestionInstance]:
        return self.train + self.valid + self.test


@dataclass(frozen=True)
class _Term:
    holder: int
    start: int
    end: int


class _World:
    """Fact set organized by office, plus the year vocabulary."""

    def __init__(self):
        self.offices: dict[tuple[int, int], list[_Term]] = {}
        self.person_busy: dict[tuple[int, int], list[tuple[int, int]]] = {}

    def add_term(self, predicate: int, group: int, term: _Term) -> None:
        self.offices.setdefault((predicate, group), []).append(term)
        self.person_busy.setdefault((term.holder, predicate), []).append((term.start, term.end))

    def is_free(self, person: int, predicate: int, start: int, end: int) -> bool:
        """A person never holds two same-predicate offices in overlapping
        years, so (subject, predicate, year) determines the object."""
        return all(e < start or s > end
                   for s, e in self.person_busy.get((person, predicate), []))

    def facts(self) -> list[tuple[int, int, int, int, int]]:
        out = []
        for (predicate, group), terms in sorted(self.offices.items()):
            for t in terms:
                out.append((t.holder, predicate, group, t.start, t.end))
        return out


def _overlap(a: tuple[int, int], b: tuple[int, int]) -> bool:
    return max(a[0], b[0]) <= min(a[1], b[1])


# --- gold answer scans (exact temporal logic over the office terms) ---

def holders_at(terms: list[_Term], year: int) -> set[int]:
    return {t.holder for t in terms if t.start <= year <= t.end}


def years_of_holder(terms: list[_Term], holder: int, vocabulary: list[int]) -> set[int]:
    spans = [(t.start, t.end) for t in terms if t.holder == holder]
    return {y for y in vocabulary if any(s <= y <= e for s, e in spans)}


def holders_before(terms: list[_Term], ref: _Term) -> set[int]:
    ends = [t.end for t in terms if t.end < ref.start]
    if not ends:
        return set()
    latest = max(ends)
    return {t.holder for t in terms if t.end == latest}


def holders_after(terms: list[_Term], ref: _Term) -> set[int]:
    starts = [t.start for t in terms if t.start > ref.end]
    if not starts:
        return set()
    earliest = min(starts)
    return {t.holder for t in terms if t.start == earliest}


def first_holders(terms: list[_Term]) -> set[int]:
    earliest = min(t.start for t in terms)
    return {t.holder for t in terms if t.start == earliest}


def last_holders(terms: list[_Term]) -> set[int]:
    latest = max(t.end for t in terms)
    return {t.holder for t in terms if t.end == latest}


def holders_during(terms: list[_Term], ref_spans: list[tuple[int, int]]) -> set[int]:
    return {
        t.holder for t in terms
        if any(_overlap((t.start, t.end), span) for span in ref_spans)
    }


def _build_world(cfg: SynthSection, rng: np.random.Generator,
                 n_persons: int, n_groups: int) -> _World:
    world = _World()
    target_facts = max(n_groups, int(round(cfg.num_entities * cfg.facts_per_entity / 2)))
    offices: list[tuple[int, int]] = []
    # two offices per group (one when only one predicate exists) keeps the
    # first/last question space large enough at desk scale
    n_preds = min(2, cfg.num_predicates)
    for g in range(n_groups):
        preds = rng.choice(cfg.num_predicates, size=n_preds, replace=False)
        offices.extend((int(p), g) for p in sorted(preds.tolist()))

    cursors = {office: cfg.year_start + int(rng.integers(0, 3)) for office in offices}
    previous: dict[tuple[int, int], int] = {}
    total = 0

    def terms_of(office):
        return world.offices.get(office, [])

    while True:
        # keep going until the fact budget is met AND every office has a
        # two-term chain (so first/last and before/after stay answerable)
        if total >= target_facts and all(len(terms_of(o)) >= 2 for o in offices):
            break
        progressed = False
        for office in offices:
            if total >= target_facts and len(terms_of(office)) >= 2:
                continue
            start = cursors[office]
            if start > cfg.year_end:
                continue
            length = int(rng.integers(1, cfg.max_term_years + 1))
            end = min(start + length - 1, cfg.year_end)
            candidates = [
                p for p in range(n_persons)
                if p != previous.get(office) and world.is_free(p, office[0], start, end)
            ]
            if not candidates:
                cursors[office] = end + 1
                continue
            holder = int(rng.choice(candidates))
            world.add_term(office[0], office[1], _Term(holder, start, end))
            previous[office] = holder
            cursors[office] = end + 1 + int(rng.integers(0, 2))
            total += 1
            progressed = True
        if not progressed and all(cursors[o] > cfg.year_end for o in offices):
            break
        if not progressed:
            # every remaining office failed to place a holder this round;
            # cursors moved forward, so retry until years run out
            continue
    if total == 0:
        raise ConfigError("synthetic world is empty; widen the year range or entity count")
    return world


def _build_kg(cfg: SynthSection, world: _World, n_persons: int, n_groups: int) -> TemporalKG:
    entities = [f"person{i:02d}" for i in range(n_persons)]
    entities += [f"group{g:02d}" for g in range(n_groups)]
    predicates = [
        _PREDICATE_WORDS[i] if i < len(_PREDICATE_WORDS) else f"role{i:02d}"
        for i in range(cfg.num_predicates)
    ]
    years = sorted({y for _, _, _, s, e in world.facts() for y in (s, e)})
    year_id = {y: i for i, y in enumerate(years)}
    facts = [
        TemporalFact(holder, pred, n_persons + group, year_id[s], year_id[e])
        for holder, pred, group, s, e in world.facts()
    ]
    return TemporalKG(entities=entities, predicates=predicates, timestamps=years, facts=facts)


def generate_synthetic(cfg: SynthSection, seed: int) -> SyntheticDataset:
    """Deterministic KG + question splits for one (config, seed)."""
    if cfg.year_end <= cfg.year_start:
        raise ConfigError("synth year range is empty")
    if cfg.questions_per_category < 1:
        raise ConfigError("questions_per_category must be >= 1")
    if cfg.num_predicates < 1 or cfg.num_entities < 3:
        raise ConfigError("need at least one predicate and three entities")
    rng = np.random.default_rng(seed)
    n_persons = max(2, int(round(cfg.num_entities * 2 / 3)))
    n_groups = max(1, cfg.num_entities - n_persons)

    world = _build_world(cfg, rng, n_persons, n_groups)
    kg = _build_kg(cfg, world, n_persons, n_groups)
    vocabulary = kg.timestamps

    offices = sorted(world.offices)
    multi_term_offices = [o for o in offices if len(world.offices[o]) >= 2]
    if 2 * len(multi_term_offices) < cfg.questions_per_category:
        raise ConfigError(
            f"only {2 * len(multi_term_offices)} distinct first/last questions are "
            f"possible but {cfg.questions_per_category} per category were requested; "
            "increase entities or facts per entity"
        )

    def office_names(office: tuple[int, int]) -> tuple[str, str]:
        return kg.predicates[office[0]], kg.entities[n_persons + office[1]]

    def group_id(office: tuple[int, int]) -> int:
        return n_persons + office[1]

    questions: dict[str, list[QuestionInstance]] = {}
    seen_texts: set[str] = set()

    def emit(category: str, text: str, ann: QuestionAnnotations) -> bool:
        if text in seen_texts:
            return False
        seen_texts.add(text)
        bucket = questions.setdefault(category, [])
        bucket.append(QuestionInstance(id=f"{category}-{len(bucket):04d}", text=text,
                                       annotations=ann))
        return True

    def sample(category: str, maker) -> None:
        budget = 400 * cfg.questions_per_category
        made = 0
        for _ in range(budget):
            if made >= cfg.questions_per_category:
                return
            if maker():
                made += 1
        raise ConfigError(
            f"could not generate {cfg.questions_per_category} {category} questions; "
            "increase entities, facts per entity or the year range"
        )

    def make_simple_entity() -> bool:
        office = offices[int(rng.integers(len(offices)))]
        terms = world.offices[office]
        term = terms[int(rng.integers(len(terms)))]
        valid_years = [y for y in vocabulary if term.start <= y <= term.end]
        if not valid_years:
            return False
        year = int(valid_years[int(rng.integers(len(valid_years)))])
        gold = holders_at(terms, year)
        if not gold:
            return False
        pred, group = office_names(office)
        return emit(
            "simple_entity",
            f"who was {pred} of {group} in {year}",
            QuestionAnnotations(
                gold_answers=tuple(sorted(gold)), question_type="simple_entity",
                answer_type="entity", subject_entity=group_id(office),
                timestamp=kg.timestamp_id_of(year),
            ),
        )

    def make_simple_time() -> bool:
        office = offices[int(rng.integers(len(offices)))]
        terms = world.offices[office]
        term = terms[int(rng.integers(len(terms)))]
        years = years_of_holder(terms, term.holder, vocabulary)
        if not years:
            return False
        pred, group = office_names(office)
        person = kg.entities[term.holder]
        gold = tuple(sorted(kg.timestamp_id_of(y) for y in years))
        return emit(
            "simple_time",
            f"when was {person} the {pred} of {group}",
            QuestionAnnotations(
                gold_answers=gold, question_type="simple_time", answer_type="time",
                subject_entity=term.holder, object_entity=group_id(office),
            ),
        )

    def make_before_after() -> bool:
        if not multi_term_offices:
            raise ConfigError("no office has two terms; before/after questions impossible")
        office = multi_term_offices[int(rng.integers(len(multi_term_offices)))]
        terms = world.offices[office]
        term = terms[int(rng.integers(len(terms)))]
        # the reference person must hold this office exactly once to be unambiguous
        if sum(1 for t in terms if t.holder == term.holder) != 1:
            return False
        direction = "before" if rng.integers(2) == 0 else "after"
        gold = holders_before(terms, term) if direction == "before" else holders_after(terms, term)
        if not gold:
            return False
        pred, group = office_names(office)
        person = kg.entities[term.holder]
        return emit(
            "before_after",
            f"who was the {pred} of {group} {direction} {person}",
            QuestionAnnotations(
                gold_answers=tuple(sorted(gold)), question_type="before_after",
                answer_type="entity", subject_entity=group_id(office),
                object_entity=term.holder,
            ),
        )

    def make_first_last() -> bool:
        if not multi_term_offices:
            raise ConfigError("no office has two terms; first/last questions impossible")
        office = multi_term_offices[int(rng.integers(len(multi_term_offices)))]
        terms = world.offices[office]
        which = "first" if rng.integers(2) == 0 else "last"
        gold = first_holders(terms) if which == "first" else last_holders(terms)
        pred, group = office_names(office)
        return emit(
            "first_last",
            f"who was the {which} {pred} of {group}",
            QuestionAnnotations(
                gold_answers=tuple(sorted(gold)), question_type="first_last",
                answer_type="entity", subject_entity=group_id(office),
            ),
        )

    def make_time_join() -> bool:
        if len(offices) < 2:
            return False
        a = offices[int(rng.integers(len(offices)))]
        b = offices[int(rng.integers(len(offices)))]
        if a == b:
            return False
        ref_terms = world.offices[b]
        ref_holder = ref_terms[int(rng.integers(len(ref_terms)))].holder
        ref_spans = [(t.start, t.end) for t in ref_terms if t.holder == ref_holder]
        gold = holders_during(world.offices[a], ref_spans)
        if not gold:
            return False
        pred_a, group_a = office_names(a)
        pred_b, group_b = office_names(b)
        person = kg.entities[ref_holder]
        return emit(
            "time_join",
            f"who was {pred_a} of {group_a} when {person} was {pred_b} of {group_b}",
            QuestionAnnotations(
                gold_answers=tuple(sorted(gold)), question_type="time_join",
                answer_type="entity", subject_entity=group_id(a), object_entity=ref_holder,
            ),
        )

    sample("simple_entity", make_simple_entity)
    sample("simple_time", make_simple_time)
    sample("before_after", make_before_after)
    sample("first_last", make_first_last)
    sample("time_join", make_time_join)

    train: list[QuestionInstance] = []
    valid: list[QuestionInstance] = []
    test: list[QuestionInstance] = []
    for category in sorted(questions):
        bucket = questions[category]
        order = rng.permutation(len(bucket))
        n = len(bucket)
        n_train = int(round(cfg.train_fraction * n))
        n_valid = int(round(cfg.valid_fraction * n))
        n_train = min(n_train, n)
        n_valid = min(n_valid, n - n_train)
        for pos, idx in enumerate(order):
            inst = bucket[int(idx)]
            if pos < n_train:
                train.append(inst)
            elif pos < n_train + n_valid:
                valid.append(inst)
            else:
                test.append(inst)
    return SyntheticDataset(kg=kg, train=train, valid=valid, test=test)


def dataset_fingerprint(ds: SyntheticDataset) -> str:
    """Canonical digest of the KG plus all question records (determinism checks)."""
    doc = {
        "entities": ds.kg.entities,
        "predicates": ds.kg.predicates,
        "timestamps": ds.kg.timestamps,
        "facts": [
            (f.subject, f.predicate, f.object, f.t_start, f.t_end) for f in ds.kg.facts
        ],
        "splits": {
            name: [question_to_record(q, ds.kg) for q in split]
            for name, split in (("train", ds.train), ("valid", ds.valid), ("test", ds.test))
        },
    }
    blob = json.dumps(doc, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()
