"""Per-document quality metrics, threshold adaptation, stopword
derivation, and filter application.

Fixed filters keep their English reference thresholds everywhere;
tunable filters get per-language thresholds derived from reference
corpus statistics by one of five adaptation methods (english, mean_std,
quantile, ten_tail, median_ratio). The chosen method per filter group:
ten_tail on Wikipedia for the tunable FineWeb quality metrics, quantile
on Wikipedia for the tunable Gopher quality metrics, and mean_std on
Common Crawl for the Gopher repetition metrics.
"""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Iterable, Iterator

import numpy as np

from .corpus import Document, LanguageKey
from .segmentation import dominant_script

logger = logging.getLogger(__name__)

MAX_VALID_REMOVAL = 0.75
MIN_STOPWORDS = 8
DEFAULT_STOPWORD_FREQUENCY = 0.003

_BULLET_PREFIXES = ("-", "*", "•", "‣", "▪", "●")
_ELLIPSIS_SUFFIXES = ("...", "…")
_TERMINAL_PUNCT = (".", "!", "?", '"', "'", "…", "”", "’")


# ---------------------------------------------------------------------------
# Metric computation


def _nonempty_lines(text: str) -> list[str]:
    return [ln for ln in text.split("\n") if ln.strip()]


def _dup_line_stats(lines: list[str]) -> tuple[float, float]:
    """(fraction of duplicate lines, fraction of characters in them).

    Occurrences beyond the first of any repeated line count as
    duplicates, both by line and by character mass.
    """
    if not lines:
        return 0.0, 0.0
    counts = Counter(ln.strip() for ln in lines)
    dup_lines = 0
    dup_chars = 0
    total_chars = 0
    for ln, c in counts.items():
        total_chars += len(ln) * c
        if c > 1:
            dup_lines += c - 1
            dup_chars += len(ln) * (c - 1)
    return (
        dup_lines / len(lines),
        dup_chars / total_chars if total_chars else 0.0,
    )


def _top_ngram_char_ratio(words: list[str], n: int) -> float:
    if len(words) < n:
        return 0.0
    grams = Counter(tuple(words[i : i + n]) for i in range(len(words) - n + 1))
    total_chars = sum(len(w) for w in words)
    if not total_chars:
        return 0.0
    gram, count = max(grams.items(), key=lambda kv: (kv[1], kv[0]))
    return count * sum(len(w) for w in gram) / total_chars


def _repeated_ngram_char_ratio(words: list[str], n: int) -> float:
    """Fraction of word characters covered by any n-gram occurring twice."""
    if len(words) < n:
        return 0.0
    counts = Counter(tuple(words[i : i + n]) for i in range(len(words) - n + 1))
    covered = [False] * len(words)
    for i in range(len(words) - n + 1):
        if counts[tuple(words[i : i + n])] > 1:
            for j in range(i, i + n):
                covered[j] = True
    total_chars = sum(len(w) for w in words)
    if not total_chars:
        return 0.0
    return sum(len(w) for w, c in zip(words, covered) if c) / total_chars


def compute_metrics(
    doc: Document,
    segmenter: Callable[[str], list[str]],
    stopwords: set[str] | None = None,
) -> dict[str, float]:
    """Full metric catalog for one document."""
    text = doc.text
    words = segmenter(text)
    lines = _nonempty_lines(text)
    n_words = len(words)
    n_lines = len(lines)
    dup_line_fraction, dup_line_char_ratio = _dup_line_stats(lines)

    symbols = text.count("#") + text.count("…") + text.count("...")
    bullet_lines = sum(1 for ln in lines if ln.lstrip().startswith(_BULLET_PREFIXES))
    ellipsis_lines = sum(1 for ln in lines if ln.rstrip().endswith(_ELLIPSIS_SUFFIXES))
    bad_end_lines = sum(
        1 for ln in lines if not ln.rstrip().endswith(_TERMINAL_PUNCT)
    )
    non_alpha_words = sum(1 for w in words if not any(ch.isalpha() for ch in w))
    stop_count = 0.0
    if stopwords is not None:
        lowered = [w.lower() for w in words]
        stop_count = float(sum(1 for w in lowered if w in stopwords))

    metrics: dict[str, float] = {
        "word_count": float(n_words),
        "symbol_to_word_ratio": symbols / n_words if n_words else 0.0,
        "bullet_line_ratio": bullet_lines / n_lines if n_lines else 0.0,
        "ellipsis_line_ratio": ellipsis_lines / n_lines if n_lines else 0.0,
        "stopword_count": stop_count,
        "dup_line_char_ratio": dup_line_char_ratio,
        "lines_not_ending_punct_ratio": bad_end_lines / n_lines if n_lines else 0.0,
        "lines_to_words_ratio": n_lines / n_words if n_words else 0.0,
        "avg_word_length": (
            sum(len(w) for w in words) / n_words if n_words else 0.0
        ),
        "non_alpha_word_ratio": non_alpha_words / n_words if n_words else 0.0,
        "dup_line_fraction": dup_line_fraction,
    }
    for n in (2, 3, 4):
        metrics[f"top_{n}_gram_char_ratio"] = _top_ngram_char_ratio(words, n)
    for n in range(5, 11):
        metrics[f"rep_{n}_gram_char_ratio"] = _repeated_ngram_char_ratio(words, n)
    return metrics


# ---------------------------------------------------------------------------
# Filter catalog

# (metric_id, direction, english_threshold) for the fixed filters.
FIXED_FILTERS: list[tuple[str, str, float]] = [
    ("word_count", "min", 50.0),
    ("word_count", "max", 100000.0),
    ("symbol_to_word_ratio", "max", 0.1),
    ("bullet_line_ratio", "max", 0.9),
    ("ellipsis_line_ratio", "max", 0.3),
    ("stopword_count", "min", 2.0),
    ("dup_line_char_ratio", "max", 0.1),
]

# Tunable metrics by filter group, with direction and a default English
# reference threshold (overridable via config).
TUNABLE_FILTERS: dict[str, list[tuple[str, str, float]]] = {
    "fwq": [
        ("lines_not_ending_punct_ratio", "max", 0.3),
        ("lines_to_words_ratio", "max", 0.3),
    ],
    "goq": [
        ("avg_word_length", "max", 10.0),
        ("avg_word_length", "min", 3.0),
        ("non_alpha_word_ratio", "max", 0.2),
    ],
    "gor": [
        ("dup_line_fraction", "max", 0.3),
        ("top_2_gram_char_ratio", "max", 0.2),
        ("top_3_gram_char_ratio", "max", 0.18),
        ("top_4_gram_char_ratio", "max", 0.16),
        ("rep_5_gram_char_ratio", "max", 0.15),
        ("rep_6_gram_char_ratio", "max", 0.14),
        ("rep_7_gram_char_ratio", "max", 0.13),
        ("rep_8_gram_char_ratio", "max", 0.12),
        ("rep_9_gram_char_ratio", "max", 0.11),
        ("rep_10_gram_char_ratio", "max", 0.10),
    ],
}

# Chosen adaptation method and reference corpus per tunable group.
GROUP_METHODS = {
    "fwq": ("ten_tail", "wikipedia"),
    "goq": ("quantile", "wikipedia"),
    "gor": ("mean_std", "common_crawl"),
}


@dataclass(frozen=True)
class FilterSpec:
    metric_id: str
    direction: str  # "max" fails when metric > threshold; "min" when <
    threshold: float
    provenance: str = "fixed"
    reference: str | None = None

    @property
    def spec_id(self) -> str:
        return f"{self.metric_id}_{self.direction}"

    def passes(self, value: float) -> bool:
        if self.direction == "max":
            return value <= self.threshold
        return value >= self.threshold

    def to_dict(self) -> dict:
        return {
            "metric_id": self.metric_id,
            "direction": self.direction,
            "threshold": self.threshold,
            "provenance": self.provenance,
            "reference": self.reference,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FilterSpec":
        return cls(
            d["metric_id"],
            d["direction"],
            float(d["threshold"]),
            d.get("provenance", "fixed"),
            d.get("reference"),
        )


@dataclass
class MetricDistribution:
    metric_id: str
    language: LanguageKey
    reference: str  # wikipedia | glotlid_corpus | common_crawl
    samples: list[float] = field(default_factory=list)


class DegenerateDistribution(ValueError):
    pass


# ---------------------------------------------------------------------------
# Threshold adaptation

# Quantile/CDF pair built on the same linear interpolation so that
# F(quantile(q)) == q and quantile(F(t)) == t on strictly increasing
# samples.


def empirical_quantile(samples: list[float], q: float) -> float:
    return float(np.quantile(np.asarray(samples, dtype=float), q, method="linear"))


def empirical_cdf(samples: list[float], t: float) -> float:
    xs = np.sort(np.asarray(samples, dtype=float))
    n = len(xs)
    if n == 1:
        return 0.5
    ps = np.linspace(0.0, 1.0, n)
    return float(np.interp(t, xs, ps, left=0.0, right=1.0))


def adapt_threshold(
    method: str,
    metric_id: str,
    direction: str,
    english_threshold: float,
    d_en: MetricDistribution | None,
    d_l: MetricDistribution,
) -> FilterSpec:
    """Derive a per-language threshold from reference distributions."""
    if not d_l.samples:
        raise DegenerateDistribution(f"empty target distribution for {metric_id}")

    def english_spec(provenance: str = "english") -> FilterSpec:
        return FilterSpec(
            metric_id, direction, english_threshold, provenance, d_l.reference
        )

    if method == "english":
        return english_spec()

    if method == "ten_tail":
        if len(set(d_l.samples)) < 2:
            logger.warning(
                "degenerate distribution for %s; falling back to english", metric_id
            )
            return english_spec()
        q = 0.9 if direction == "max" else 0.1
        t = empirical_quantile(d_l.samples, q)
        return FilterSpec(metric_id, direction, t, "ten_tail", d_l.reference)

    if d_en is None or not d_en.samples:
        raise DegenerateDistribution(f"english distribution required for {method}")

    if method == "mean_std":
        en = np.asarray(d_en.samples, dtype=float)
        tgt = np.asarray(d_l.samples, dtype=float)
        sd_en = float(en.std())
        if sd_en == 0.0:
            raise DegenerateDistribution("zero std in English distribution")
        n_sd = (english_threshold - float(en.mean())) / sd_en
        t = float(tgt.mean()) + n_sd * float(tgt.std())
        return FilterSpec(metric_id, direction, t, "mean_std", d_l.reference)

    if method == "quantile":
        if len(set(d_l.samples)) < 2 or len(set(d_en.samples)) < 2:
            logger.warning(
                "degenerate distribution for %s; falling back to english", metric_id
            )
            return english_spec()
        q = empirical_cdf(d_en.samples, english_threshold)
        t = empirical_quantile(d_l.samples, q)
        return FilterSpec(metric_id, direction, t, "quantile", d_l.reference)

    if method == "median_ratio":
        med_en = empirical_quantile(d_en.samples, 0.5)
        med_l = empirical_quantile(d_l.samples, 0.5)
        if med_en == 0.0:
            raise DegenerateDistribution("zero English median in median_ratio")
        t = english_threshold * med_l / med_en
        return FilterSpec(metric_id, direction, t, "median_ratio", d_l.reference)

    raise ValueError(f"unknown adaptation method: {method}")


def removal_fraction(spec: FilterSpec, samples: list[float]) -> float:
    failing = sum(0 if spec.passes(v) else 1 for v in samples)
    return failing / len(samples) if samples else 0.0


def build_filter_suite(
    language: LanguageKey,
    references: dict[str, dict[str, MetricDistribution]],
    english_references: dict[str, dict[str, MetricDistribution]] | None = None,
    english_thresholds: dict[tuple[str, str], float] | None = None,
) -> list[FilterSpec]:
    """Assemble fixed + adapted filter specs for one language.

    ``references`` maps reference-corpus name ("wikipedia",
    "glotlid_corpus", "common_crawl") to per-metric distributions for
    the target language; ``english_references`` likewise for English
    (needed by quantile/mean_std). Combinations that would remove more
    than 75% of the reference data, or nothing at all, fall back to the
    English threshold with a warning.
    """
    overrides = english_thresholds or {}
    specs: list[FilterSpec] = []
    for metric_id, direction, default_t in FIXED_FILTERS:
        t = overrides.get((metric_id, direction), default_t)
        specs.append(FilterSpec(metric_id, direction, t, "fixed"))
    for group, metrics in TUNABLE_FILTERS.items():
        method, ref_name = GROUP_METHODS[group]
        ref = references.get(ref_name)
        if ref is None and ref_name == "wikipedia":
            ref = references.get("glotlid_corpus")
            ref_name = "glotlid_corpus"
        if ref is None:
            raise DegenerateDistribution(
                f"missing reference corpus {ref_name!r} for group {group}"
            )
        en_ref = (english_references or {}).get(
            "wikipedia" if ref_name != "common_crawl" else "common_crawl", {}
        )
        for metric_id, direction, default_t in metrics:
            t_en = overrides.get((metric_id, direction), default_t)
            d_l = ref.get(metric_id)
            if d_l is None or not d_l.samples:
                raise DegenerateDistribution(
                    f"missing reference distribution for {metric_id}"
                )
            d_en = en_ref.get(metric_id)
            try:
                spec = adapt_threshold(method, metric_id, direction, t_en, d_en, d_l)
            except DegenerateDistribution as e:
                logger.warning("%s: %s; falling back to english", metric_id, e)
                spec = FilterSpec(metric_id, direction, t_en, "english", ref_name)
            frac = removal_fraction(spec, d_l.samples)
            if frac > MAX_VALID_REMOVAL:
                logger.warning(
                    "%s/%s removes %.0f%% of reference data; falling back to english",
                    metric_id,
                    method,
                    100 * frac,
                )
                spec = FilterSpec(metric_id, direction, t_en, "english", ref_name)
            specs.append(spec)
    return specs


# ---------------------------------------------------------------------------
# Stopwords


@dataclass
class StopwordList:
    language: LanguageKey
    words: list[str]
    frequency_threshold_used: float

    def as_set(self) -> set[str]:
        return set(self.words)


class CorpusTooSmall(ValueError):
    pass


def _is_alphabetic(token: str) -> bool:
    return any(ch.isalpha() for ch in token)


def derive_stopwords(
    reference_corpus: Iterable[Document],
    segmenter: Callable[[str], list[str]],
    frequency_threshold: float = DEFAULT_STOPWORD_FREQUENCY,
    language: LanguageKey | None = None,
) -> StopwordList:
    """Stopwords = alphabetic tokens above a relative-frequency floor.

    The floor is halved until at least eight stopwords remain (eight
    matching the length of the original English quality-filter list).
    """
    counts: Counter = Counter()
    total = 0
    for doc in reference_corpus:
        words = [w.lower() for w in segmenter(doc.text)]
        counts.update(words)
        total += len(words)
    if total == 0:
        raise CorpusTooSmall("reference corpus has no words")
    alpha = {w: c for w, c in counts.items() if _is_alphabetic(w)}
    if len(alpha) < MIN_STOPWORDS:
        raise CorpusTooSmall(
            f"only {len(alpha)} distinct alphabetic words; need {MIN_STOPWORDS}"
        )
    threshold = frequency_threshold
    while True:
        selected = [w for w, c in alpha.items() if c / total >= threshold]
        if len(selected) >= MIN_STOPWORDS or threshold < 1e-12:
            break
        threshold /= 2.0
    if len(selected) < MIN_STOPWORDS:
        selected = [
            w for w, _ in sorted(alpha.items(), key=lambda kv: (-kv[1], kv[0]))
        ][:MIN_STOPWORDS]
    selected.sort(key=lambda w: (-alpha[w], w))
    lang = language or LanguageKey("und", "Zzzz")
    return StopwordList(lang, selected, threshold)


# ---------------------------------------------------------------------------
# Reference-corpus cleaning

DEFAULT_SECTION_HEADERS = (
    "references",
    "notes",
    "bibliography",
    "external links",
    "sources",
    "see also",
    "footnotes",
)

ENGLISH_KEY = LanguageKey("eng", "Latn")


def strip_trailing_sections(
    text: str, headers: tuple[str, ...] = DEFAULT_SECTION_HEADERS
) -> str:
    """Cut the text at the first notes/references-style section header."""
    lines = text.split("\n")
    for i, ln in enumerate(lines):
        normalized = ln.strip().strip("=#:*").strip().lower()
        if normalized in headers:
            return "\n".join(lines[:i]).rstrip()
    return text


def clean_reference(
    docs: Iterable[Document],
    expected_script: str,
    lid_model=None,
    english_confidence_cutoff: float = 0.7,
    headers: tuple[str, ...] = DEFAULT_SECTION_HEADERS,
) -> Iterator[Document]:
    """Reference-corpus cleaning before stopword/threshold derivation.

    Drops documents whose majority script mismatches the expected one
    and documents the classifier labels English above the confidence
    cutoff; truncates notes/references-style trailing sections.
    """
    for doc in docs:
        text = strip_trailing_sections(doc.text, headers)
        if not text.strip():
            continue
        script = dominant_script(text)
        if script is not None and script != expected_script:
            continue
        if lid_model is not None:
            pred = lid_model.predict(text)
            if (
                pred.language == ENGLISH_KEY
                and pred.confidence > english_confidence_cutoff
            ):
                continue
        if text != doc.text:
            doc = Document(
                id=doc.id,
                url=doc.url,
                text=text,
                language=doc.language,
                lid_confidence=doc.lid_confidence,
                cluster_size=doc.cluster_size,
                filter_verdicts=doc.filter_verdicts,
                weight=doc.weight,
                extra=dict(doc.extra),
            )
        yield doc


# ---------------------------------------------------------------------------
# Filter application


@dataclass
class FilterReport:
    failed: dict[str, int] = field(default_factory=dict)
    total: int = 0
    removed: int = 0

    @property
    def global_rate(self) -> float:
        return self.removed / self.total if self.total else 0.0

    def to_dict(self) -> dict:
        return {
            "filters": {
                spec_id: {
                    "failed": n,
                    "rate": n / self.total if self.total else 0.0,
                }
                for spec_id, n in sorted(self.failed.items())
            },
            "total": self.total,
            "removed": self.removed,
            "global_rate": self.global_rate,
        }


class MissingMetric(KeyError):
    pass


def apply_filters(
    docs: Iterable[Document],
    suite: list[FilterSpec],
    segmenter: Callable[[str], list[str]],
    stopwords: set[str] | None = None,
    report: FilterReport | None = None,
) -> Iterator[Document]:
    """Annotate every document with per-filter verdicts.

    Yields all documents (failures included) so downstream rehydration
    can compute filtering rates by cluster size; a document passes
    overall iff every spec passes.
    """
    rep = report if report is not None else FilterReport()
    for doc in docs:
        metrics = compute_metrics(doc, segmenter, stopwords=stopwords)
        verdicts: dict[str, bool] = {}
        for spec in suite:
            if spec.metric_id not in metrics:
                raise MissingMetric(spec.metric_id)
            verdicts[spec.spec_id] = spec.passes(metrics[spec.metric_id])
            if not verdicts[spec.spec_id]:
                rep.failed[spec.spec_id] = rep.failed.get(spec.spec_id, 0) + 1
        doc.filter_verdicts = verdicts
        rep.total += 1
        if not all(verdicts.values()):
            rep.removed += 1
        yield doc


def passes_all(doc: Document) -> bool:
    return doc.filter_verdicts is not None and all(doc.filter_verdicts.values())
