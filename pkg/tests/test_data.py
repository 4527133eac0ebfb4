"""Question file loading with per-record error collection."""

import json

import pytest

from tkgqa.errors import ParseError
from tkgqa.harness.data import load_questions, question_to_record, save_questions
from tkgqa.kg import TemporalFact, TemporalKG


@pytest.fixture
def kg():
    return TemporalKG(
        entities=["Giorgio", "Italy"],
        predicates=["president of"],
        timestamps=[2006, 2008, 2013],
        facts=[TemporalFact(0, 0, 1, 0, 2)],
    )


def _write(tmp_path, records):
    path = tmp_path / "questions.json"
    path.write_text(json.dumps(records))
    return path


GOOD = {
    "id": "q1",
    "text": "who was the president of Italy in 2008",
    "question_type": "simple_entity",
    "answer_type": "entity",
    "subject": "Italy",
    "object": None,
    "timestamp": 2008,
    "answers": ["Giorgio"],
}


class TestLoadQuestions:
    def test_entity_answer_record(self, tmp_path, kg):
        instances, errors = load_questions(_write(tmp_path, [GOOD]), kg)
        assert errors == []
        [inst] = instances
        assert inst.annotations.answer_type == "entity"
        assert inst.annotations.gold_answers == (0,)
        assert inst.annotations.subject_entity == 1
        assert inst.annotations.timestamp == 1

    def test_time_answer_record(self, tmp_path, kg):
        record = dict(GOOD, id="q2", question_type="simple_time", answer_type="time",
                      answers=[2006, 2013], timestamp=None)
        [inst], errors = load_questions(_write(tmp_path, [record]), kg)[0], []
        assert inst.annotations.gold_answers == (0, 2)

    def test_empty_file(self, tmp_path, kg):
        instances, errors = load_questions(_write(tmp_path, []), kg)
        assert instances == [] and errors == []

    def test_unknown_entity_collected_not_fatal(self, tmp_path, kg):
        bad = dict(GOOD, id="q3", answers=["Nobody"])
        instances, errors = load_questions(_write(tmp_path, [GOOD, bad]), kg)
        assert len(instances) == 1
        assert len(errors) == 1
        assert errors[0].question_id == "q3"
        assert "Nobody" in errors[0].message

    def test_missing_field_collected(self, tmp_path, kg):
        bad = {"id": "q4", "text": "incomplete"}
        instances, errors = load_questions(_write(tmp_path, [bad]), kg)
        assert instances == []
        assert errors[0].index == 0

    def test_unknown_year_collected(self, tmp_path, kg):
        bad = dict(GOOD, id="q5", timestamp=1999)
        _, errors = load_questions(_write(tmp_path, [bad]), kg)
        assert len(errors) == 1

    def test_malformed_json_is_hard_error(self, tmp_path, kg):
        path = tmp_path / "broken.json"
        path.write_text("{not json")
        with pytest.raises(ParseError):
            load_questions(path, kg)

    def test_non_array_rejected(self, tmp_path, kg):
        path = tmp_path / "obj.json"
        path.write_text("{}")
        with pytest.raises(ParseError):
            load_questions(path, kg)


class TestRoundTrip:
    def test_save_then_load(self, tmp_path, kg):
        [inst], _ = load_questions(_write(tmp_path, [GOOD]), kg)
        out = tmp_path / "out.json"
        save_questions([inst], out, kg)
        [back], errors = load_questions(out, kg)
        assert errors == []
        assert back.id == inst.id
        assert back.text == inst.text
        assert back.annotations == inst.annotations

    def test_record_projection(self, kg, tmp_path):
        [inst], _ = load_questions(_write(tmp_path, [GOOD]), kg)
        record = question_to_record(inst, kg)
        assert record["subject"] == "Italy"
        assert record["answers"] == ["Giorgio"]
        assert record["timestamp"] == 2008
