"""Question dataset IO.

Question files are JSON arrays of records:

    {"id": str, "text": str,
     "question_type": simple_entity|simple_time|before_after|first_last|time_join,
     "answer_type": "entity" | "time",
     "subject": entity name or null, "object": entity name or null,
     "timestamp": year integer or null,
     "answers": [entity names] or [year integers]}

Names resolve against the KG vocabularies at load time; records that fail
to resolve are collected into an error list while the valid ones are kept.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from ..answer import ANSWER_TYPES, CATEGORIES, QuestionAnnotations
from ..errors import ParseError, VocabularyError
from ..kg import TemporalKG


@dataclass
class QuestionInstance:
    """One question with resolved annotations."""

    id: str
    text: str
    annotations: QuestionAnnotations


@dataclass
class RecordError:
    """Why one question record was dropped at load time."""

    index: int
    question_id: str | None
    message: str


def _resolve_record(record: dict, kg: TemporalKG) -> QuestionInstance:
    for key in ("id", "text", "question_type", "answer_type", "answers"):
        if key not in record:
            raise ValueError(f"missing field {key!r}")
    qtype = record["question_type"]
    if qtype not in CATEGORIES:
        raise ValueError(f"unknown question_type {qtype!r}")
    atype = record["answer_type"]
    if atype not in ANSWER_TYPES:
        raise ValueError(f"unknown answer_type {atype!r}")
    answers = record["answers"]
    if not isinstance(answers, list) or not answers:
        raise ValueError("answers must be a non-empty list")
    if atype == "entity":
        gold = tuple(kg.entity_id_of(str(name)) for name in answers)
    else:
        gold = tuple(kg.timestamp_id_of(int(year)) for year in answers)
    subject = record.get("subject")
    obj = record.get("object")
    timestamp = record.get("timestamp")
    ann = QuestionAnnotations(
        gold_answers=gold,
        question_type=qtype,
        answer_type=atype,
        subject_entity=None if subject is None else kg.entity_id_of(str(subject)),
        object_entity=None if obj is None else kg.entity_id_of(str(obj)),
        timestamp=None if timestamp is None else kg.timestamp_id_of(int(timestamp)),
    )
    return QuestionInstance(id=str(record["id"]), text=str(record["text"]), annotations=ann)


def load_questions(path: str | Path, kg: TemporalKG) -> tuple[list[QuestionInstance], list[RecordError]]:
    """Parse and resolve a question file.

    Malformed JSON is a hard ParseError; per-record resolution failures are
    returned, not raised.
    """
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(doc, list):
        raise ParseError(f"{path}: expected a JSON array of question records")
    instances: list[QuestionInstance] = []
    errors: list[RecordError] = []
    for i, record in enumerate(doc):
        try:
            if not isinstance(record, dict):
                raise ValueError("record must be a JSON object")
            instances.append(_resolve_record(record, kg))
        except (ValueError, VocabularyError, TypeError) as exc:
            qid = record.get("id") if isinstance(record, dict) else None
            errors.append(RecordError(index=i, question_id=qid, message=str(exc)))
    return instances, errors


def question_to_record(instance: QuestionInstance, kg: TemporalKG) -> dict:
    """Name-level JSON record of one instance (inverse of loading)."""
    ann = instance.annotations
    if ann.answer_type == "entity":
        answers = [kg.entities[g] for g in ann.gold_answers]
    else:
        answers = [kg.year_of(g) for g in ann.gold_answers]
    return {
        "id": instance.id,
        "text": instance.text,
        "question_type": ann.question_type,
        "answer_type": ann.answer_type,
        "subject": None if ann.subject_entity is None else kg.entities[ann.subject_entity],
        "object": None if ann.object_entity is None else kg.entities[ann.object_entity],
        "timestamp": None if ann.timestamp is None else kg.year_of(ann.timestamp),
        "answers": answers,
    }


def save_questions(instances: list[QuestionInstance], path: str | Path, kg: TemporalKG) -> None:
    records = [question_to_record(inst, kg) for inst in instances]
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(records, fh, indent=1, sort_keys=True)
        fh.write("\n")
