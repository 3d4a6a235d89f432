"""Early-signal benchmark selection from per-checkpoint score traces.

A task is selected when its score traces are monotone (mean Spearman
rank correlation with training step >= 0.5), clearly above random
(max final improvement over baseline >= 3x the end-of-training noise),
and low-noise across the four seed-variant models (SNR >= 20, relaxed
for generative tasks). Ordering consistency (mean Kendall tau-a between
consecutive model rankings late in training) is reported but not used
for selection. Aggregate scores floor each task at its random baseline,
rescale to [0, 1], and macro-average over task categories.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

MONOTONICITY_MIN = 0.5
NON_RANDOMNESS_MIN = 3.0
SNR_MIN = 20.0
SNR_MIN_GENERATIVE = 5.0
ORDERING_IGNORE_TOKENS = 15_000_000_000
END_WINDOW = 5


@dataclass
class ScoreTrace:
    model_id: str
    task_id: str
    category: str  # RC | GK | NLU | CR/RES
    points: list[tuple[int, int, float]]  # (step, tokens, score)
    random_baseline: float = 0.0
    is_generative: bool = False

    def __post_init__(self):
        steps = [p[0] for p in self.points]
        if any(b <= a for a, b in zip(steps, steps[1:])):
            raise ValueError("steps must be strictly increasing")

    @property
    def steps(self) -> list[int]:
        return [p[0] for p in self.points]

    @property
    def scores(self) -> list[float]:
        return [p[2] for p in self.points]


# ---------------------------------------------------------------------------
# Rank statistics


def _average_ranks(xs: Sequence[float]) -> list[float]:
    order = sorted(range(len(xs)), key=lambda i: xs[i])
    ranks = [0.0] * len(xs)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and xs[order[j + 1]] == xs[order[i]]:
            j += 1
        avg = (i + j) / 2.0 + 1.0
        for k in range(i, j + 1):
            ranks[order[k]] = avg
        i = j + 1
    return ranks


def spearman(x: Sequence[float], y: Sequence[float]) -> float:
    """Spearman rank correlation with average ranks for ties."""
    if len(x) != len(y) or len(x) < 2:
        raise ValueError("need two equal-length sequences of >= 2 points")
    rx = _average_ranks(x)
    ry = _average_ranks(y)
    mx = sum(rx) / len(rx)
    my = sum(ry) / len(ry)
    cov = sum((a - mx) * (b - my) for a, b in zip(rx, ry))
    vx = sum((a - mx) ** 2 for a in rx)
    vy = sum((b - my) ** 2 for b in ry)
    if vx == 0 or vy == 0:
        return 0.0
    return cov / math.sqrt(vx * vy)


def kendall_tau_a(x: Sequence[float], y: Sequence[float]) -> float:
    """Kendall tau-a: (concordant - discordant) / C(n, 2)."""
    n = len(x)
    if n != len(y) or n < 2:
        raise ValueError("need two equal-length sequences of >= 2 points")
    c = d = 0
    for i in range(n):
        for j in range(i + 1, n):
            s = (x[i] - x[j]) * (y[i] - y[j])
            if s > 0:
                c += 1
            elif s < 0:
                d += 1
    return (c - d) / (n * (n - 1) / 2)


# ---------------------------------------------------------------------------
# Criteria


def monotonicity(traces: Sequence[ScoreTrace]) -> float:
    """Mean Spearman correlation between steps and scores across models."""
    if not traces:
        raise ValueError("no traces")
    vals = []
    for t in traces:
        if len(t.points) < 3:
            raise ValueError(f"trace {t.model_id}/{t.task_id} has < 3 points")
        vals.append(spearman([float(s) for s in t.steps], t.scores))
    return sum(vals) / len(vals)


def _seed_step_matrix(
    seed_traces: Sequence[ScoreTrace],
) -> tuple[list[int], list[list[float]]]:
    grids = {tuple(t.steps) for t in seed_traces}
    if len(grids) != 1:
        raise ValueError("seed traces must share one evaluation step grid")
    steps = list(grids.pop())
    by_step = [[t.scores[i] for t in seed_traces] for i in range(len(steps))]
    return steps, by_step


def _sigma_series(seed_traces: Sequence[ScoreTrace]) -> list[float]:
    _, by_step = _seed_step_matrix(seed_traces)
    out = []
    for scores in by_step:
        mu = sum(scores) / len(scores)
        out.append(math.sqrt(sum((s - mu) ** 2 for s in scores) / len(scores)))
    return out


def snr(seed_traces: Sequence[ScoreTrace]) -> float:
    """Mean over steps of (seed-model mean score) / (population std).

    Zero-noise steps are excluded from the mean; if every step has zero
    noise the result is +inf.
    """
    if not seed_traces:
        raise ValueError("no seed traces")
    _, by_step = _seed_step_matrix(seed_traces)
    ratios = []
    zero_noise = 0
    for scores in by_step:
        mu = sum(scores) / len(scores)
        sigma = math.sqrt(sum((s - mu) ** 2 for s in scores) / len(scores))
        if sigma == 0.0:
            zero_noise += 1
        else:
            ratios.append(mu / sigma)
    if not ratios:
        return math.inf
    return sum(ratios) / len(ratios)


def non_randomness(
    traces: Sequence[ScoreTrace],
    baseline: float,
    sigma_series: Sequence[float],
) -> float:
    """max over models of (final score - baseline), over end-of-training
    noise (mean sigma of the last 5 steps)."""
    if not traces:
        raise ValueError("no traces")
    if len(sigma_series) < END_WINDOW:
        raise ValueError(f"need >= {END_WINDOW} evaluation steps")
    max_d = max(t.scores[-1] - baseline for t in traces)
    sigma_end = sum(sigma_series[-END_WINDOW:]) / END_WINDOW
    if sigma_end == 0.0:
        return math.inf if max_d > 0 else -math.inf
    return max_d / sigma_end


def ordering_consistency(
    traces: Sequence[ScoreTrace],
    ignore_tokens: int = ORDERING_IGNORE_TOKENS,
) -> float | None:
    """Mean Kendall tau-a between model rankings at consecutive steps in
    the second half of training, after the token ignore-window.

    Returns None when fewer than two eligible consecutive step pairs
    exist.
    """
    if len(traces) < 2:
        return None
    grids = {tuple(t.steps) for t in traces}
    if len(grids) != 1:
        raise ValueError("traces must share one evaluation step grid")
    steps = list(grids.pop())
    n = len(steps)
    eligible = [
        i
        for i in range(n)
        if traces[0].points[i][1] >= ignore_tokens and i >= n / 2
    ]
    if len(eligible) < 2:
        return None
    taus = []
    for a, b in zip(eligible, eligible[1:]):
        if b != a + 1:
            continue
        sa = [t.scores[a] for t in traces]
        sb = [t.scores[b] for t in traces]
        taus.append(kendall_tau_a(sa, sb))
    if len(taus) < 1:
        return None
    return sum(taus) / len(taus)


# ---------------------------------------------------------------------------
# Aggregation and selection


def rescale_score(score: float, baseline: float) -> float:
    """Floor at the random baseline, then normalize to [0, 1]."""
    if score <= baseline:
        return 0.0
    return (score - baseline) / (1.0 - baseline)


def aggregate_score(
    task_scores: Iterable[tuple[str, float, float]],
) -> float:
    """Macro-average of per-category means of rescaled task scores.

    ``task_scores`` yields (category, score, random_baseline) triples.
    """
    by_cat: dict[str, list[float]] = {}
    for category, score, baseline in task_scores:
        by_cat.setdefault(category, []).append(rescale_score(score, baseline))
    if not by_cat:
        raise ValueError("no task scores")
    cat_means = [sum(v) / len(v) for v in by_cat.values()]
    return sum(cat_means) / len(cat_means)


@dataclass
class TaskCriteria:
    task_id: str
    monotonicity: float
    snr: float
    non_randomness: float
    ordering_consistency: float | None
    is_generative: bool
    selected: bool = False

    def to_dict(self) -> dict:
        return {
            "task_id": self.task_id,
            "monotonicity": self.monotonicity,
            "snr": self.snr,
            "non_randomness": self.non_randomness,
            "ordering_consistency": self.ordering_consistency,
            "is_generative": self.is_generative,
            "selected": self.selected,
        }


@dataclass
class SelectionThresholds:
    monotonicity_min: float = MONOTONICITY_MIN
    non_randomness_min: float = NON_RANDOMNESS_MIN
    snr_min: float = SNR_MIN
    snr_min_generative: float = SNR_MIN_GENERATIVE


def select_tasks(
    reference_traces: dict[str, list[ScoreTrace]],
    seed_traces: dict[str, list[ScoreTrace]],
    thresholds: SelectionThresholds = SelectionThresholds(),
) -> list[TaskCriteria]:
    """Per-task criteria and pass/fail, keyed by task id.

    ``reference_traces`` holds the reference-dataset model traces used
    for monotonicity, non-randomness, and ordering consistency;
    ``seed_traces`` the four seed-variant model traces used for SNR.
    """
    out = []
    for task_id in sorted(reference_traces):
        refs = reference_traces[task_id]
        seeds = seed_traces.get(task_id, [])
        if not seeds:
            raise ValueError(f"no seed-variant traces for task {task_id}")
        mono = monotonicity(refs)
        task_snr = snr(seeds)
        sigmas = _sigma_series(seeds)
        rand = non_randomness(refs, refs[0].random_baseline, sigmas)
        order = ordering_consistency(refs)
        generative = refs[0].is_generative
        snr_floor = (
            thresholds.snr_min_generative if generative else thresholds.snr_min
        )
        crit = TaskCriteria(
            task_id=task_id,
            monotonicity=mono,
            snr=task_snr,
            non_randomness=rand,
            ordering_consistency=order,
            is_generative=generative,
            selected=(
                mono >= thresholds.monotonicity_min
                and rand >= thresholds.non_randomness_min
                and task_snr >= snr_floor
            ),
        )
        out.append(crit)
    return out


# ---------------------------------------------------------------------------
# Trace I/O


def read_traces(path: str) -> list[ScoreTrace]:
    """Load traces from line-delimited point records.

    Each line: {model_id, task_id, category, step, tokens, score,
    random_baseline, is_generative}. Points sharing (model_id, task_id)
    form one trace, ordered by step.
    """
    grouped: dict[tuple[str, str], dict] = {}
    with open(path, encoding="utf-8") as f:
        for line in f:
            if not line.strip():
                continue
            rec = json.loads(line)
            key = (rec["model_id"], rec["task_id"])
            entry = grouped.setdefault(
                key,
                {
                    "category": rec.get("category", ""),
                    "random_baseline": float(rec.get("random_baseline", 0.0)),
                    "is_generative": bool(rec.get("is_generative", False)),
                    "points": [],
                },
            )
            entry["points"].append(
                (int(rec["step"]), int(rec.get("tokens", 0)), float(rec["score"]))
            )
    traces = []
    for (model_id, task_id), entry in sorted(grouped.items()):
        points = sorted(entry["points"])
        traces.append(
            ScoreTrace(
                model_id=model_id,
                task_id=task_id,
                category=entry["category"],
                points=points,
                random_baseline=entry["random_baseline"],
                is_generative=entry["is_generative"],
            )
        )
    return traces
