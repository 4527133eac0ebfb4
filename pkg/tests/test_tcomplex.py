"""Complex embedding scoring, training loss gradients, checkpoint IO."""

import numpy as np
import pytest

from oracles import finite_difference, max_rel_error, triple_score_loop
from tkgqa.errors import DivergenceError, InputError, ShapeError
from tkgqa.kg import TemporalFact, TemporalKG
from tkgqa.tcomplex import (
    ComplexEmbeddingTable,
    TkgEmbeddings,
    TkgTrainConfig,
    expand_training_tuples,
    init_embeddings,
    load_tables,
    object_hits_at_1,
    save_tables,
    score_all_objects,
    score_fact,
    tkg_batch_loss,
    train_tkg,
)


class TestScoreFact:
    def test_identity_embeddings(self):
        v = np.ones(4, dtype=complex)
        assert score_fact(v, v, v, v) == 4.0

    def test_imaginary_subject_kills_real_part(self):
        ones = np.ones(4, dtype=complex)
        assert score_fact(1j * ones, ones, ones, ones) == 0.0

    def test_matches_scalar_loop(self, rng):
        for _ in range(100):
            d = 8
            vecs = [rng.standard_normal(d) + 1j * rng.standard_normal(d) for _ in range(4)]
            got = score_fact(*vecs)
            want = triple_score_loop(vecs[0], vecs[1], vecs[2], vecs[3])
            assert got == pytest.approx(want, abs=1e-10)

    def test_dimension_mismatch(self):
        v4 = np.ones(4, dtype=complex)
        v5 = np.ones(5, dtype=complex)
        with pytest.raises(ShapeError):
            score_fact(v4, v4, v5, v4)

    def test_conjugate_symmetry_swapping_subject_object(self, rng):
        # swapping s and o while conjugating (p * t) preserves the score
        d = 8
        for _ in range(20):
            s, p, o, t = (rng.standard_normal(d) + 1j * rng.standard_normal(d) for _ in range(4))
            direct = score_fact(s, p, o, t)
            swapped = score_fact(o, np.conj(p), s, np.conj(t))
            assert direct == pytest.approx(swapped, abs=1e-10)

    def test_linear_in_subject(self, rng):
        d = 6
        s1, s2, p, o, t = (rng.standard_normal(d) + 1j * rng.standard_normal(d)
                           for _ in range(5))
        lhs = score_fact(2.5 * s1 + s2, p, o, t)
        rhs = 2.5 * score_fact(s1, p, o, t) + score_fact(s2, p, o, t)
        assert lhs == pytest.approx(rhs, abs=1e-9)


class TestScoreAllObjects:
    def test_identity_embeddings(self):
        d = 4
        table = ComplexEmbeddingTable(np.ones((3, d)), np.zeros((3, d)))
        ones = np.ones(d, dtype=complex)
        np.testing.assert_array_equal(score_all_objects(ones, ones, ones, table),
                                      [d, d, d])

    def test_matches_per_entity_loop(self, rng):
        d, n = 8, 7
        table = ComplexEmbeddingTable(rng.standard_normal((n, d)), rng.standard_normal((n, d)))
        s, p, t = (rng.standard_normal(d) + 1j * rng.standard_normal(d) for _ in range(3))
        sweep = score_all_objects(s, p, t, table)
        for j in range(n):
            assert sweep[j] == pytest.approx(score_fact(s, p, table.row(j), t), abs=1e-10)

    def test_gold_object_wins_after_training(self, tiny_kg):
        emb = train_tkg(tiny_kg, TkgTrainConfig(d_kg=16, epochs=150, lr=0.05, seed=3,
                                                log_every=0))
        tuples = expand_training_tuples(tiny_kg)
        assert object_hits_at_1(emb, tuples) == 1.0


def _rand_kg():
    return TemporalKG(
        entities=["e0", "e1", "e2", "e3"],
        predicates=["p0", "p1"],
        timestamps=[2000, 2001, 2003],
        facts=[
            TemporalFact(0, 0, 1, 0, 1),
            TemporalFact(2, 1, 3, 1, 2),
            TemporalFact(1, 0, 2, 2, 2),
        ],
    )


class TestTrainingLossGradients:
    def test_analytic_matches_finite_differences(self):
        kg = _rand_kg()
        emb = init_embeddings(kg, d_kg=8, init_scale=0.3, seed=7)
        tuples = expand_training_tuples(kg)
        l2 = 0.05
        params = emb.params()
        grads = {k: np.zeros_like(v) for k, v in params.items()}
        tkg_batch_loss(emb, tuples, l2, grads)

        for name, arr in params.items():
            fd = finite_difference(lambda: tkg_batch_loss(emb, tuples, l2), arr, eps=1e-5)
            assert max_rel_error(grads[name], fd) <= 1e-4, name

    def test_loss_decreases_under_training(self, tiny_kg):
        cfg = TkgTrainConfig(d_kg=8, epochs=30, lr=0.05, seed=0, log_every=0)
        emb0 = init_embeddings(tiny_kg, cfg.d_kg, cfg.init_scale, cfg.seed)
        tuples = expand_training_tuples(tiny_kg)
        before = tkg_batch_loss(emb0, tuples, cfg.l2)
        emb = train_tkg(tiny_kg, cfg)
        after = tkg_batch_loss(emb, tuples, cfg.l2)
        assert after < before

    def test_empty_batch_rejected(self, tiny_kg):
        emb = init_embeddings(tiny_kg, 4, 0.1, 0)
        with pytest.raises(InputError):
            tkg_batch_loss(emb, np.empty((0, 4), dtype=np.int64), 0.0)


class TestTrainTkg:
    def test_empty_kg_rejected(self):
        kg = TemporalKG()
        with pytest.raises(InputError):
            train_tkg(kg, TkgTrainConfig())

    def test_zero_epochs_returns_seeded_init(self, tiny_kg):
        cfg = TkgTrainConfig(d_kg=8, epochs=0, seed=11)
        emb = train_tkg(tiny_kg, cfg)
        ref = init_embeddings(tiny_kg, 8, cfg.init_scale, 11)
        np.testing.assert_array_equal(emb.entities.real, ref.entities.real)
        np.testing.assert_array_equal(emb.timestamps.imag, ref.timestamps.imag)

    def test_same_seed_bit_identical(self, tiny_kg):
        cfg = TkgTrainConfig(d_kg=8, epochs=10, seed=5, log_every=0)
        a = train_tkg(tiny_kg, cfg)
        b = train_tkg(tiny_kg, cfg)
        for pa, pb in zip(a.params().values(), b.params().values()):
            np.testing.assert_array_equal(pa, pb)

    def test_divergence_aborts(self, tiny_kg):
        # triple products overflow float64 -> non-finite loss on the first batch
        cfg = TkgTrainConfig(d_kg=8, epochs=1, init_scale=1e103, seed=0, log_every=0)
        with pytest.raises(DivergenceError, match="non-finite"):
            train_tkg(tiny_kg, cfg)

    def test_expansion_covers_interval_years(self, tiny_kg):
        tuples = expand_training_tuples(tiny_kg)
        fact = tiny_kg.facts[0]  # years 2000..2002 -> vocab ids 0, 1
        rows = tuples[(tuples[:, 0] == fact.subject + 1) & (tuples[:, 1] == fact.predicate)]
        assert set(rows[:, 3].tolist()) >= {fact.t_start + 1, fact.t_end + 1}

    def test_dummy_rows_present_and_reserved(self, tiny_kg):
        emb = init_embeddings(tiny_kg, 8, 0.1, 0)
        assert emb.entities.count == tiny_kg.num_entities + 1
        assert emb.timestamps.count == tiny_kg.num_timestamps + 1
        assert emb.entity_row(None) == 0
        assert emb.entity_row(0) == 1


class TestTableArchive:
    def test_roundtrip_bit_exact(self, tmp_path, tiny_kg):
        emb = init_embeddings(tiny_kg, 8, 0.1, 42)
        path = tmp_path / "tables.npz"
        save_tables(path, emb, extra={"note": "test"})
        back, meta = load_tables(path)
        assert meta["d_kg"] == 8 and meta["note"] == "test"
        for a, b in zip(emb.params().values(), back.params().values()):
            np.testing.assert_array_equal(a, b)

    def test_version_check(self, tmp_path, tiny_kg):
        emb = init_embeddings(tiny_kg, 4, 0.1, 0)
        path = tmp_path / "tables.npz"
        save_tables(path, emb)
        import json

        import numpy as np2
        with np2.load(path) as npz:
            arrays = {k: npz[k] for k in npz.files}
        arrays["meta"] = np2.array(json.dumps({"format_version": 999}))
        np2.savez(path, **arrays)
        with pytest.raises(InputError):
            load_tables(path)


class TestShapeInvariants:
    def test_mismatched_real_imag_rejected(self):
        with pytest.raises(ShapeError):
            ComplexEmbeddingTable(np.zeros((3, 4)), np.zeros((3, 5)))

    def test_batched_sweep_equals_scalar_loop_property(self, rng):
        # property over random seeds: batched object scores equal score_fact
        for trial in range(10):
            d = int(rng.integers(2, 10))
            n = int(rng.integers(1, 6))
            table = ComplexEmbeddingTable(rng.standard_normal((n, d)),
                                          rng.standard_normal((n, d)))
            s, p, t = (rng.standard_normal(d) + 1j * rng.standard_normal(d)
                       for _ in range(3))
            sweep = score_all_objects(s, p, t, table)
            want = [score_fact(s, p, table.row(j), t) for j in range(n)]
            np.testing.assert_allclose(sweep, want, atol=1e-10, rtol=0)
