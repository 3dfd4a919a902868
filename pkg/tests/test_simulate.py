from __future__ import annotations

import numpy as np
import pytest

from vate.simulate import (
    SavingsReport,
    SimConfig,
    render_savings_table,
    run_cost_sim,
    sample_answer,
    sample_answers,
    synthetic_problems,
    zipf_probability,
)


def small_config(**overrides):
    base = dict(
        n_problems=3,
        distinct_answers_per_problem=10,
        zipf_exponent=1.1,
        n_submissions=400,
        quality_pass_prob=1.0,
        seed=7,
    )
    base.update(overrides)
    return SimConfig(**base)


class TestConfigValidation:
    @pytest.mark.parametrize(
        "field,value",
        [
            ("n_problems", 0),
            ("distinct_answers_per_problem", 0),
            ("zipf_exponent", 0.0),
            ("n_submissions", 0),
            ("quality_pass_prob", 1.5),
        ],
    )
    def test_bad_values_rejected(self, field, value):
        with pytest.raises(ValueError):
            small_config(**{field: value})


class TestZipfSampling:
    def test_probabilities_normalize(self):
        total = sum(zipf_probability(1.1, 50, i) for i in range(1, 51))
        assert total == pytest.approx(1.0)

    def test_probability_is_monotone_decreasing(self):
        probs = [zipf_probability(1.1, 20, i) for i in range(1, 21)]
        assert probs == sorted(probs, reverse=True)

    def test_out_of_range_index(self):
        with pytest.raises(ValueError):
            zipf_probability(1.1, 10, 0)
        with pytest.raises(ValueError):
            zipf_probability(1.1, 10, 11)

    def test_empirical_frequency_tracks_oracle(self):
        rng = np.random.default_rng(123)
        draws = sample_answers(1.1, 200, rng, 100_000)
        top_frequency = float(np.mean(draws == 1))
        assert top_frequency == pytest.approx(
            zipf_probability(1.1, 200, 1), abs=0.01
        )

    def test_draws_stay_in_range(self):
        rng = np.random.default_rng(5)
        draws = sample_answers(1.3, 30, rng, 10_000)
        assert draws.min() >= 1 and draws.max() <= 30

    def test_single_draw_matches_vector_path(self):
        a = sample_answer(1.1, 50, np.random.default_rng(99))
        b = int(sample_answers(1.1, 50, np.random.default_rng(99), 1)[0])
        assert a == b

    def test_top40_mass_oracle(self):
        mass = sum(zipf_probability(1.1, 200, i) for i in range(1, 41))
        assert mass == pytest.approx(0.7827, abs=0.0005)


class TestSyntheticProblems:
    def test_scripted_shape(self):
        problems = synthetic_problems(3)
        assert [p.problem_id for p in problems] == [
            "sim-0000", "sim-0001", "sim-0002",
        ]
        first = problems[0]
        assert first.statement == "Compute 11 × 17 + 31."
        assert first.correct_answer == str(11 * 17 + 31)

    def test_ids_unique(self):
        problems = synthetic_problems(25)
        assert len({p.problem_id for p in problems}) == 25


class TestRunCostSim:
    def test_backend_calls_equal_distinct_keys(self):
        report = run_cost_sim(small_config())
        assert report.backend_calls == sum(report.per_problem_distinct_seen)
        assert report.backend_calls <= report.bound_nk == 30
        assert report.cache_hits == 400 - report.backend_calls

    def test_reproducible_across_runs(self):
        first = run_cost_sim(small_config())
        second = run_cost_sim(small_config())
        assert first == second

    def test_seed_changes_stream(self):
        a = sample_answers(1.1, 1000, np.random.default_rng(7), 200)
        b = sample_answers(1.1, 1000, np.random.default_rng(8), 200)
        assert not np.array_equal(a, b)

    def test_failing_quality_disables_caching(self):
        report = run_cost_sim(
            small_config(n_submissions=200, quality_pass_prob=0.0)
        )
        assert report.cache_hits == 0
        assert report.backend_calls == 200

    def test_concurrent_mode_keeps_call_bound(self):
        report = run_cost_sim(small_config(), concurrency=8)
        assert report.backend_calls == sum(report.per_problem_distinct_seen)

    def test_top40_coverage_with_narrow_tail(self):
        report = run_cost_sim(small_config())
        assert report.top40_coverage == 1.0  # only 10 categories exist

    def test_render_table_mentions_core_numbers(self):
        cfg = small_config()
        report = run_cost_sim(cfg)
        table = render_savings_table(cfg, report)
        assert str(report.backend_calls) in table
        assert "hit rate" in table


class TestAcceptanceShapeSmall:
    def test_hit_rate_grows_with_volume(self):
        light = run_cost_sim(small_config(n_submissions=60))
        heavy = run_cost_sim(small_config(n_submissions=2_000))
        assert heavy.hit_rate > light.hit_rate
        assert heavy.hit_rate > 0.9
