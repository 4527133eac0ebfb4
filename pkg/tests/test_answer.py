"""Pooling, projection, entity/time scoring, loss and prediction order."""

import math

import numpy as np
import pytest

from oracles import finite_difference, max_rel_error, rank_by_sort, triple_score_loop
from tkgqa.answer import (
    ProjectionParams,
    QuestionAnnotations,
    ScoreVector,
    gold_indices,
    init_projection,
    loss,
    loss_and_score_grad,
    pool_question,
    predict,
    project,
    rank_of_best_gold,
    score_answers,
    score_answers_backward,
    score_answers_rows,
)
from tkgqa.errors import InputError, ShapeError
from tkgqa.kg import TemporalFact, TemporalKG
from tkgqa.tcomplex import init_embeddings, score_fact


def _ann(**kw):
    defaults = dict(gold_answers=(0,), question_type="simple_entity", answer_type="entity")
    defaults.update(kw)
    return QuestionAnnotations(**defaults)


@pytest.fixture
def emb(tiny_kg):
    return init_embeddings(tiny_kg, d_kg=8, init_scale=0.5, seed=21)


class TestPool:
    def test_single_row(self, rng):
        row = rng.standard_normal((1, 5))
        np.testing.assert_array_equal(pool_question(row), row[0])

    def test_opposite_rows_cancel(self, rng):
        u = rng.standard_normal(6)
        np.testing.assert_allclose(pool_question(np.stack([u, -u])), 0.0, atol=1e-15)

    def test_hand_mean(self, rng):
        m = rng.standard_normal((3, 4))
        want = [(m[0, c] + m[1, c] + m[2, c]) / 3.0 for c in range(4)]
        np.testing.assert_allclose(pool_question(m), want, atol=1e-12)

    def test_empty_rejected(self):
        with pytest.raises(ShapeError):
            pool_question(np.zeros((0, 4)))


class TestProject:
    def test_zero_input_zero_bias(self, rng):
        params = init_projection(d_txt=6, d_kg=4, rng=rng)
        q_ent, q_time = project(np.zeros(6), params)
        np.testing.assert_array_equal(q_ent, np.zeros(4, dtype=complex))
        np.testing.assert_array_equal(q_time, np.zeros(4, dtype=complex))

    def test_identity_layout_split(self):
        # with d_txt = 2*d_kg and identity maps, the first half lands in the
        # real slots and the second half in the imaginary slots
        d_kg = 3
        params = ProjectionParams(
            w_ent=np.eye(2 * d_kg), b_ent=np.zeros(2 * d_kg),
            w_time=np.eye(2 * d_kg), b_time=np.zeros(2 * d_kg),
        )
        q = np.arange(6.0)
        q_ent, _ = project(q, params)
        np.testing.assert_array_equal(q_ent.real, [0, 1, 2])
        np.testing.assert_array_equal(q_ent.imag, [3, 4, 5])

    def test_matches_explicit_matmul(self, rng):
        params = init_projection(d_txt=7, d_kg=5, rng=rng)
        q = rng.standard_normal(7)
        q_ent, q_time = project(q, params)
        ent = params.w_ent @ q + params.b_ent
        np.testing.assert_allclose(q_ent, ent[:5] + 1j * ent[5:], atol=1e-12)
        time = params.w_time @ q + params.b_time
        np.testing.assert_allclose(q_time, time[:5] + 1j * time[5:], atol=1e-12)


class TestScoreAnswers:
    def test_identity_embeddings_constant_scores(self, tiny_kg):
        emb = init_embeddings(tiny_kg, d_kg=4, init_scale=0.0, seed=0)
        for table in (emb.entities, emb.predicates, emb.timestamps):
            table.real[:] = 1.0
            table.imag[:] = 0.0
        ann = _ann(subject_entity=0, timestamp=1)
        q_ent = np.ones(4, dtype=complex)
        q_time = np.ones(4, dtype=complex)
        scores = score_answers(q_ent, q_time, ann, emb)
        np.testing.assert_array_equal(scores.entity_scores, 4.0)
        np.testing.assert_array_equal(scores.time_scores, 4.0)

    def test_equals_per_element_score_fact(self, emb, tiny_kg, rng):
        q_ent = rng.standard_normal(8) + 1j * rng.standard_normal(8)
        q_time = rng.standard_normal(8) + 1j * rng.standard_normal(8)
        ann = _ann(subject_entity=2, object_entity=4, timestamp=1)
        scores = score_answers(q_ent, q_time, ann, emb)
        e_s = emb.entities.row(emb.entity_row(2))
        e_t = emb.timestamps.row(emb.timestamp_row(1))
        e_o = emb.entities.row(emb.entity_row(4))
        for j in range(tiny_kg.num_entities):
            cand = emb.entities.row(emb.entity_row(j))
            assert scores.entity_scores[j] == pytest.approx(
                score_fact(e_s, q_ent, cand, e_t), abs=1e-10)
        for tau in range(tiny_kg.num_timestamps):
            cand = emb.timestamps.row(emb.timestamp_row(tau))
            assert scores.time_scores[tau] == pytest.approx(
                score_fact(e_s, q_time, e_o, cand), abs=1e-10)

    def test_scalar_loop_oracle(self, emb, rng):
        q_ent = rng.standard_normal(8) + 1j * rng.standard_normal(8)
        q_time = rng.standard_normal(8) + 1j * rng.standard_normal(8)
        ann = _ann(subject_entity=1, object_entity=3, timestamp=2)
        scores = score_answers(q_ent, q_time, ann, emb)
        e_s = emb.entities.row(2)
        e_t = emb.timestamps.row(3)
        e_o = emb.entities.row(4)
        for j in range(scores.num_entities):
            want = triple_score_loop(e_s, q_ent, emb.entities.row(j + 1), e_t)
            assert scores.entity_scores[j] == pytest.approx(want, abs=1e-10)
        for tau in range(scores.num_timestamps):
            want = triple_score_loop(e_s, q_time, e_o, emb.timestamps.row(tau + 1))
            assert scores.time_scores[tau] == pytest.approx(want, abs=1e-10)

    def test_missing_annotations_use_dummy_rows(self, emb, rng):
        q_ent = rng.standard_normal(8) + 1j * rng.standard_normal(8)
        q_time = rng.standard_normal(8) + 1j * rng.standard_normal(8)
        no_time = _ann(subject_entity=0)
        scores = score_answers(q_ent, q_time, no_time, emb)
        e_s = emb.entities.row(1)
        dummy_t = emb.timestamps.row(0)
        want = score_fact(e_s, q_ent, emb.entities.row(1), dummy_t)
        assert scores.entity_scores[0] == pytest.approx(want, abs=1e-10)
        all_missing = _ann()
        scores2 = score_answers(q_ent, q_time, all_missing, emb)
        want2 = score_fact(emb.entities.row(0), q_ent, emb.entities.row(1), dummy_t)
        assert scores2.entity_scores[0] == pytest.approx(want2, abs=1e-10)

    def test_wrong_query_width(self, emb):
        with pytest.raises(ShapeError):
            score_answers(np.ones(3, dtype=complex), np.ones(8, dtype=complex), _ann(), emb)


class TestLoss:
    def test_saturated_softmax(self):
        scores = ScoreVector(entity_scores=np.array([500.0, -500.0]),
                             time_scores=np.zeros(0))
        assert loss(scores, _ann(gold_answers=(0,))) == pytest.approx(0.0, abs=1e-12)

    def test_uniform_scores_log_n(self):
        n_e, n_t = 4, 2
        scores = ScoreVector(entity_scores=np.zeros(n_e), time_scores=np.zeros(n_t))
        assert loss(scores, _ann(gold_answers=(1,))) == pytest.approx(math.log(n_e + n_t))

    def test_closed_form_three_candidates(self):
        scores = ScoreVector(entity_scores=np.array([1.0, 0.0, 0.0]), time_scores=np.zeros(0))
        want = -math.log(math.e / (math.e + 2.0))
        got = loss(scores, _ann(gold_answers=(0,)))
        assert got == pytest.approx(want, abs=1e-12)
        assert got == pytest.approx(0.5514, abs=1e-4)

    def test_multi_answer_mean(self):
        scores = ScoreVector(entity_scores=np.array([1.0, 2.0, -1.0]), time_scores=np.zeros(0))
        single = [loss(scores, _ann(gold_answers=(g,))) for g in (0, 1)]
        both = loss(scores, _ann(gold_answers=(0, 1)))
        assert both == pytest.approx(sum(single) / 2.0, abs=1e-12)

    def test_time_answer_offsets_into_concat(self):
        scores = ScoreVector(entity_scores=np.array([0.0, 0.0]),
                             time_scores=np.array([10.0, 0.0]))
        got = loss(scores, _ann(gold_answers=(0,), answer_type="time",
                                question_type="simple_time"))
        assert got == pytest.approx(0.0, abs=1e-3)

    def test_gold_out_of_range(self):
        scores = ScoreVector(entity_scores=np.zeros(3), time_scores=np.zeros(2))
        with pytest.raises(InputError):
            loss(scores, _ann(gold_answers=(3,)))
        with pytest.raises(InputError):
            loss(scores, _ann(gold_answers=(2,), answer_type="time",
                              question_type="simple_time"))

    def test_shift_invariance_and_probability_sum(self, rng):
        scores = ScoreVector(entity_scores=rng.standard_normal(5),
                             time_scores=rng.standard_normal(3))
        ann = _ann(gold_answers=(2, 4))
        base, grad = loss_and_score_grad(scores, ann)
        shifted = ScoreVector(entity_scores=scores.entity_scores + 7.5,
                              time_scores=scores.time_scores + 7.5)
        shifted_loss = loss(shifted, ann)
        assert shifted_loss == pytest.approx(base, abs=1e-9)
        # softmax probabilities (grad + gold mass) sum to 1
        p = grad.copy()
        np.add.at(p, gold_indices(ann, 5, 3), 1.0 / 2)
        assert p.sum() == pytest.approx(1.0, abs=1e-6)
        assert (p >= 0).all()

    def test_grad_matches_finite_differences(self, rng):
        ent = rng.standard_normal(4)
        tim = rng.standard_normal(3)
        ann = _ann(gold_answers=(1, 3))

        def value():
            return loss(ScoreVector(entity_scores=ent, time_scores=tim), ann)

        _, grad = loss_and_score_grad(ScoreVector(entity_scores=ent, time_scores=tim), ann)
        fd_e = finite_difference(value, ent)
        fd_t = finite_difference(value, tim)
        assert max_rel_error(grad[:4], fd_e) <= 1e-6
        assert max_rel_error(grad[4:], fd_t) <= 1e-6


class TestScoreBackward:
    def test_query_and_table_grads(self, emb, rng):
        qer, qei = rng.standard_normal(8), rng.standard_normal(8)
        qtr, qti = rng.standard_normal(8), rng.standard_normal(8)
        rows = (2, 3, 4)
        d_ent = rng.standard_normal(emb.num_entities)
        d_time = rng.standard_normal(emb.num_timestamps)

        def value():
            ent, tim, _ = score_answers_rows(qer, qei, qtr, qti, *rows, emb)
            return float(ent @ d_ent + tim @ d_time)

        _, _, cache = score_answers_rows(qer, qei, qtr, qti, *rows, emb)
        table_grads = {k: np.zeros_like(v) for k, v in emb.params().items()}
        dqer, dqei, dqtr, dqti = score_answers_backward(cache, d_ent, d_time, emb, table_grads)
        for arr, got in ((qer, dqer), (qei, dqei), (qtr, dqtr), (qti, dqti)):
            fd = finite_difference(value, arr)
            assert max_rel_error(got, fd) <= 1e-6
        for name in ("kg.ent_real", "kg.ent_imag", "kg.time_real", "kg.time_imag"):
            fd = finite_difference(value, emb.params()[name])
            assert max_rel_error(table_grads[name], fd) <= 1e-6, name


class TestPredict:
    def test_unique_max_first(self):
        ent = np.zeros(9)
        ent[7] = 5.0
        scores = ScoreVector(entity_scores=ent, time_scores=np.zeros(2))
        assert predict(scores, 1) == [("entity", 7)]

    def test_tie_broken_by_ascending_id(self):
        ent = np.zeros(6)
        ent[2] = ent[5] = 3.0
        scores = ScoreVector(entity_scores=ent, time_scores=np.zeros(0))
        assert predict(scores, 2) == [("entity", 2), ("entity", 5)]

    def test_entity_ties_precede_time_on_equal_score(self):
        scores = ScoreVector(entity_scores=np.array([1.0]), time_scores=np.array([1.0]))
        assert predict(scores, 2) == [("entity", 0), ("time", 0)]

    def test_matches_full_sort_oracle(self, rng):
        for _ in range(30):
            ne = int(rng.integers(1, 8))
            nt = int(rng.integers(0, 5))
            sv = ScoreVector(entity_scores=rng.standard_normal(ne),
                             time_scores=rng.standard_normal(nt))
            concat = sv.concatenated()
            ranks = rank_by_sort(concat.tolist())
            order = predict(sv, len(concat))
            for pos, (kind, idx) in enumerate(order, start=1):
                concat_idx = idx if kind == "entity" else ne + idx
                assert ranks[concat_idx] == pos

    def test_invariant_under_positive_affine_rescale(self, rng):
        sv = ScoreVector(entity_scores=rng.standard_normal(6),
                         time_scores=rng.standard_normal(4))
        sv2 = ScoreVector(entity_scores=3.0 * sv.entity_scores + 11.0,
                          time_scores=3.0 * sv.time_scores + 11.0)
        assert predict(sv, 10) == predict(sv2, 10)

    def test_rank_of_best_gold(self):
        sv = ScoreVector(entity_scores=np.array([0.0, 5.0, 3.0]),
                         time_scores=np.array([4.0]))
        ann = _ann(gold_answers=(0, 2))  # ranks 4 and 3 -> best 3
        assert rank_of_best_gold(sv, ann) == 3


class TestAnnotations:
    def test_empty_gold_rejected(self):
        with pytest.raises(InputError):
            QuestionAnnotations(gold_answers=(), question_type="simple_entity",
                                answer_type="entity")

    def test_unknown_category_rejected(self):
        with pytest.raises(InputError):
            QuestionAnnotations(gold_answers=(0,), question_type="weird",
                                answer_type="entity")

    def test_complex_flag(self):
        assert _ann(question_type="before_after").is_complex
        assert not _ann(question_type="simple_entity").is_complex
