import math
import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from polycurate.evalselect import (
    ScoreTrace,
    SelectionThresholds,
    aggregate_score,
    kendall_tau_a,
    monotonicity,
    non_randomness,
    ordering_consistency,
    read_traces,
    rescale_score,
    select_tasks,
    snr,
    spearman,
)


def trace(model, scores, task="t", steps=None, tokens=None, baseline=0.25,
          category="RC", generative=False):
    steps = steps or list(range(1, len(scores) + 1))
    tokens = tokens or [s * 10**9 for s in steps]
    return ScoreTrace(
        model_id=model,
        task_id=task,
        category=category,
        points=list(zip(steps, tokens, scores)),
        random_baseline=baseline,
        is_generative=generative,
    )


def brute_spearman(x, y):
    # rank-based Pearson with average ranks, O(n^2) rank computation
    def ranks(v):
        return [
            1 + sum(1 for b in v if b < a) + (sum(1 for b in v if b == a) - 1) / 2
            for a in v
        ]

    rx, ry = ranks(x), ranks(y)
    mx, my = sum(rx) / len(rx), sum(ry) / len(ry)
    num = sum((a - mx) * (b - my) for a, b in zip(rx, ry))
    den = math.sqrt(
        sum((a - mx) ** 2 for a in rx) * sum((b - my) ** 2 for b in ry)
    )
    return num / den if den else 0.0


def brute_kendall(x, y):
    c = d = 0
    n = len(x)
    for i in range(n):
        for j in range(i + 1, n):
            s = (x[i] - x[j]) * (y[i] - y[j])
            c += s > 0
            d += s < 0
    return (c - d) / (n * (n - 1) / 2)


class TestRankStatistics:
    def test_spearman_increasing(self):
        assert spearman([1, 2, 3, 4], [1, 2, 3, 4]) == pytest.approx(1.0)

    def test_spearman_decreasing(self):
        assert spearman([1, 2, 3, 4], [4, 3, 2, 1]) == pytest.approx(-1.0)

    def test_spearman_known_09(self):
        assert spearman([1, 2, 3, 4, 5], [10, 30, 20, 40, 50]) == pytest.approx(0.9)

    def test_kendall_identical(self):
        assert kendall_tau_a([1, 2, 3], [1, 2, 3]) == pytest.approx(1.0)

    def test_kendall_reversed(self):
        assert kendall_tau_a([1, 2], [2, 1]) == pytest.approx(-1.0)

    def test_kendall_one_adjacent_swap_of_three(self):
        assert kendall_tau_a([1, 2, 3], [2, 1, 3]) == pytest.approx(1 / 3)

    def test_against_brute_force_oracles(self):
        rng = random.Random(17)
        for _ in range(1000):
            n = rng.randint(2, 8)
            x = [rng.randint(0, 5) / 2 for _ in range(n)]
            y = [rng.randint(0, 5) / 2 for _ in range(n)]
            assert spearman(x, y) == pytest.approx(brute_spearman(x, y), abs=1e-12)
            assert kendall_tau_a(x, y) == pytest.approx(brute_kendall(x, y), abs=1e-12)


class TestMonotonicity:
    def test_increasing_is_one(self):
        assert monotonicity([trace("m", [0.1, 0.2, 0.3, 0.4])]) == pytest.approx(1.0)

    def test_decreasing_is_minus_one(self):
        assert monotonicity([trace("m", [0.4, 0.3, 0.2, 0.1])]) == pytest.approx(-1.0)

    def test_average_over_models(self):
        up = trace("m1", [0.1, 0.2, 0.3])
        down = trace("m2", [0.3, 0.2, 0.1])
        assert monotonicity([up, down]) == pytest.approx(0.0)

    def test_requires_three_points(self):
        with pytest.raises(ValueError):
            monotonicity([trace("m", [0.1, 0.2])])


def seed_traces(score_rows):
    # score_rows[s] = four scores at step s+1
    models = [f"seed-{i}" for i in range(3, 7)]
    return [
        trace(m, [row[i] for row in score_rows]) for i, m in enumerate(models)
    ]


class TestSnr:
    def test_identical_traces_infinite(self):
        traces = seed_traces([[0.5] * 4] * 5)
        assert snr(traces) == math.inf

    def test_constant_ratio_20(self):
        traces = seed_traces([[0.475, 0.475, 0.525, 0.525]] * 6)
        assert snr(traces) == pytest.approx(20.0, abs=1e-9)

    def test_hand_computed_one_step(self):
        traces = seed_traces([[0.4, 0.5, 0.5, 0.6]])
        assert snr(traces) == pytest.approx(0.5 / math.sqrt(0.005))

    def test_scale_covariant(self):
        rows = [[0.4, 0.5, 0.45, 0.55], [0.5, 0.6, 0.55, 0.65]]
        base = snr(seed_traces(rows))
        scaled = snr(seed_traces([[3 * v for v in row] for row in rows]))
        assert scaled == pytest.approx(base)

    def test_mismatched_grids_rejected(self):
        t1 = trace("seed-3", [0.1, 0.2, 0.3])
        t2 = trace("seed-4", [0.1, 0.2, 0.3], steps=[1, 2, 4])
        with pytest.raises(ValueError):
            snr([t1, t2])


class TestNonRandomness:
    def test_flat_at_baseline_zero(self):
        traces = [trace("m", [0.25] * 6)]
        sigmas = [0.05] * 6
        assert non_randomness(traces, 0.25, sigmas) == 0.0

    def test_boundary_three(self):
        traces = [trace("m", [0.25, 0.3, 0.3, 0.35, 0.4, 0.40])]
        sigmas = [0.05] * 6
        # max_d = 0.40 - 0.25 = 0.15; sigma_end = 0.05 -> exactly 3.0
        assert non_randomness(traces, 0.25, sigmas) == pytest.approx(3.0)

    def test_negative_max_d(self):
        traces = [trace("m", [0.2] * 5)]
        assert non_randomness(traces, 0.25, [0.05] * 5) < 0

    def test_zero_sigma_positive_improvement(self):
        traces = [trace("m", [0.25, 0.3, 0.35, 0.4, 0.5])]
        assert non_randomness(traces, 0.25, [0.0] * 5) == math.inf

    def test_needs_five_steps(self):
        with pytest.raises(ValueError):
            non_randomness([trace("m", [0.3] * 3)], 0.25, [0.1] * 3)


class TestOrderingConsistency:
    def _pair(self, a_scores, b_scores, n_steps):
        steps = list(range(1, n_steps + 1))
        tokens = [s * 10**10 for s in steps]  # all past the ignore window
        return [
            trace("a", a_scores, steps=steps, tokens=tokens),
            trace("b", b_scores, steps=steps, tokens=tokens),
        ]

    def test_stable_ranking_is_one(self):
        traces = self._pair([0.1] * 8, [0.2] * 8, 8)
        assert ordering_consistency(traces, ignore_tokens=0) == pytest.approx(1.0)

    def test_swapping_every_step_is_minus_one(self):
        a = [0.1, 0.3, 0.1, 0.3, 0.1, 0.3, 0.1, 0.3]
        b = [0.2, 0.2, 0.2, 0.2, 0.2, 0.2, 0.2, 0.2]
        traces = self._pair(a, b, 8)
        assert ordering_consistency(traces, ignore_tokens=0) == pytest.approx(-1.0)

    def test_token_ignore_window(self):
        # all tokens below the window -> no eligible pairs -> None
        steps = list(range(1, 9))
        tokens = [s * 10**6 for s in steps]
        traces = [
            trace("a", [0.1] * 8, steps=steps, tokens=tokens),
            trace("b", [0.2] * 8, steps=steps, tokens=tokens),
        ]
        assert ordering_consistency(traces) is None

    def test_single_model_undefined(self):
        assert ordering_consistency([trace("a", [0.1] * 8)]) is None


class TestAggregate:
    def test_below_baseline_is_zero(self):
        assert rescale_score(0.20, 0.25) == 0.0

    def test_endpoints(self):
        assert rescale_score(0.25, 0.25) == 0.0
        assert rescale_score(1.0, 0.25) == 1.0

    def test_hand_arithmetic(self):
        scores = [
            ("RC", 0.4, 0.25),
            ("GK", 0.55, 0.25),
            ("GK", 0.25, 0.25),
        ]
        assert aggregate_score(scores) == pytest.approx(0.2)

    def test_order_invariant(self):
        scores = [("RC", 0.4, 0.25), ("GK", 0.5, 0.25), ("RC", 0.9, 0.0)]
        assert aggregate_score(scores) == aggregate_score(list(reversed(scores)))

    def test_category_duplication_invariant(self):
        base = [("RC", 0.4, 0.25), ("GK", 0.5, 0.25)]
        doubled = base + [("GK", 0.5, 0.25)]
        assert aggregate_score(doubled) == pytest.approx(aggregate_score(base))

    @given(st.floats(0, 1), st.floats(0, 0.9))
    def test_rescaled_in_unit_interval(self, score, baseline):
        assert 0.0 <= rescale_score(score, baseline) <= 1.0

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            aggregate_score([])


class TestSelectTasks:
    def _task(self, task_id, ref_scores, seed_rows, generative=False):
        refs = [
            trace(f"ref{i}", s, task=task_id, generative=generative)
            for i, s in enumerate(ref_scores)
        ]
        seeds = [
            trace(f"seed-{3+i}", [row[i] for row in seed_rows], task=task_id)
            for i in range(4)
        ]
        return refs, seeds

    def test_engineered_pass(self):
        scores = [0.3, 0.4, 0.5, 0.6, 0.7, 0.8]
        refs, seeds = self._task("good", [scores], [[0.49, 0.49, 0.51, 0.51]] * 6)
        out = select_tasks({"good": refs}, {"good": seeds})
        assert out[0].snr > 20
        assert out[0].selected

    def test_flat_at_baseline_fails_non_randomness(self):
        refs, seeds = self._task(
            "flat", [[0.25] * 6], [[0.24, 0.25, 0.25, 0.26]] * 6
        )
        out = select_tasks({"flat": refs}, {"flat": seeds})
        assert not out[0].selected
        assert out[0].non_randomness < 3

    def test_noisy_non_generative_fails_snr(self):
        refs, seeds = self._task(
            "noisy", [[0.3, 0.4, 0.5, 0.6, 0.7, 0.8]], [[0.3, 0.5, 0.5, 0.7]] * 6
        )
        out = select_tasks({"noisy": refs}, {"noisy": seeds})
        assert out[0].snr < 20
        assert not out[0].selected

    def test_generative_relaxed_bound(self):
        refs, seeds = self._task(
            "gen",
            [[0.3, 0.4, 0.5, 0.6, 0.7, 0.8]],
            [[0.45, 0.5, 0.5, 0.55]] * 6,
            generative=True,
        )
        out = select_tasks({"gen": refs}, {"gen": seeds})
        assert 5 <= out[0].snr < 20
        assert out[0].selected

    def test_boundary_thresholds_inclusive(self):
        # scores are exact binary fractions so snr computes to exactly
        # 20.0 and non_randomness to exactly 3.0; both bounds inclusive
        thresholds = SelectionThresholds()
        refs, seeds = self._task(
            "edge",
            [[0.25, 0.3, 0.35, 0.4, 0.5, 0.625]],
            [[2.375, 2.375, 2.625, 2.625]] * 6,
        )
        out = select_tasks({"edge": refs}, {"edge": seeds}, thresholds)
        assert out[0].snr == 20.0
        assert out[0].non_randomness == 3.0
        assert out[0].selected


def test_read_traces_round_trip(tmp_path):
    import json

    path = tmp_path / "traces.jsonl"
    records = []
    for step in (1, 2, 3):
        records.append(
            {
                "model_id": "m1",
                "task_id": "taskA",
                "category": "RC",
                "step": step,
                "tokens": step * 10**9,
                "score": 0.2 + 0.1 * step,
                "random_baseline": 0.25,
                "is_generative": False,
            }
        )
    path.write_text("\n".join(json.dumps(r) for r in records))
    (t,) = read_traces(str(path))
    assert t.model_id == "m1"
    assert t.scores == [pytest.approx(0.3), pytest.approx(0.4), pytest.approx(0.5)]
