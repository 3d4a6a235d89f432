"""Precision filtering for low-resource languages.

High-affinity wordlists are built from per-language token counts: a
token belongs to language l's list when the fraction of its total
occurrences (across all languages, all counted with l's own segmenter)
in l is at least gamma. Corpora whose sampled contamination exceeds a
trigger are filtered to documents containing at least one listed word,
with a URL-whitelist escape hatch.
"""

from __future__ import annotations

import random
from collections import Counter
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

from .corpus import Document, LanguageKey

DEFAULT_GAMMA = 0.85
DEFAULT_SAMPLE_SIZE = 10_000
DEFAULT_CONTAMINATION_TRIGGER = 0.10


@dataclass
class AffinityWordlist:
    language: LanguageKey
    words: set[str]
    gamma: float = DEFAULT_GAMMA


@dataclass
class ContaminationReport:
    language: LanguageKey
    sample_size: int
    contaminated_fraction: float


@dataclass
class UrlWhitelist:
    language: LanguageKey
    terms: list[str]

    def __post_init__(self):
        if not self.terms:
            raise ValueError("URL whitelist must be non-empty")
        self.terms = [t.lower() for t in self.terms]

    def matches(self, url: str) -> bool:
        lowered = url.lower()
        return any(t in lowered for t in self.terms)


class EmptyCorpus(ValueError):
    pass


def count_tokens(
    texts: Iterable[str], segmenter: Callable[[str], list[str]]
) -> Counter:
    counts: Counter = Counter()
    for text in texts:
        counts.update(w.lower() for w in segmenter(text))
    return counts


def build_affinity_wordlists(
    corpora: dict[LanguageKey, Sequence[str]],
    segmenters: dict[LanguageKey, Callable[[str], list[str]]],
    gamma: float = DEFAULT_GAMMA,
) -> dict[LanguageKey, AffinityWordlist]:
    """Wordlist per language from raw per-language text collections.

    When scoring language l, every corpus is tokenized with l's own
    segmenter so word boundaries are consistent across the count table.
    """
    for lang, texts in corpora.items():
        if not texts:
            raise EmptyCorpus(f"empty corpus for {lang}")
    out = {}
    for lang in corpora:
        seg = segmenters[lang]
        counts_by_lang = {
            other: count_tokens(corpora[other], seg) for other in corpora
        }
        out[lang] = build_wordlist_from_counts(lang, counts_by_lang, gamma)
    return out


def build_wordlist_from_counts(
    language: LanguageKey,
    counts_by_lang: dict[LanguageKey, Counter],
    gamma: float = DEFAULT_GAMMA,
) -> AffinityWordlist:
    """Wordlist from a precomputed token-count table (one segmenter)."""
    own = counts_by_lang[language]
    words = set()
    for token, f_own in own.items():
        total = sum(counts.get(token, 0) for counts in counts_by_lang.values())
        if total and f_own / total >= gamma:
            words.add(token)
    return AffinityWordlist(language, words, gamma)


def _has_wordlist_hit(
    doc: Document,
    wordlist: AffinityWordlist,
    segmenter: Callable[[str], list[str]],
) -> bool:
    return any(w.lower() in wordlist.words for w in segmenter(doc.text))


def contamination_score(
    docs: Sequence[Document],
    wordlist: AffinityWordlist,
    segmenter: Callable[[str], list[str]],
    sample_size: int = DEFAULT_SAMPLE_SIZE,
    seed: int = 0,
) -> ContaminationReport:
    """Fraction of a seeded random sample with zero wordlist hits."""
    if not wordlist.words:
        raise ValueError("empty wordlist")
    n = min(sample_size, len(docs))
    rng = random.Random(seed)
    sample = docs if n == len(docs) else rng.sample(list(docs), n)
    contaminated = sum(
        1 for d in sample if not _has_wordlist_hit(d, wordlist, segmenter)
    )
    return ContaminationReport(
        wordlist.language, n, contaminated / n if n else 0.0
    )


@dataclass
class PrecisionReport:
    language: LanguageKey
    contamination: ContaminationReport
    applied: bool
    kept: int = 0
    removed: int = 0
    url_whitelisted: int = 0

    def to_dict(self) -> dict:
        return {
            "language": str(self.language),
            "contaminated_fraction": self.contamination.contaminated_fraction,
            "sample_size": self.contamination.sample_size,
            "applied": self.applied,
            "kept": self.kept,
            "removed": self.removed,
            "url_whitelisted": self.url_whitelisted,
        }


def precision_filter(
    docs: Sequence[Document],
    wordlist: AffinityWordlist,
    segmenter: Callable[[str], list[str]],
    url_whitelist: UrlWhitelist | None = None,
    trigger_contamination: float = DEFAULT_CONTAMINATION_TRIGGER,
    contamination: ContaminationReport | None = None,
    sample_seed: int = 0,
) -> tuple[list[Document], PrecisionReport]:
    """Apply wordlist filtering when contamination exceeds the trigger.

    A document is kept when it contains at least one wordlist word, or
    when its URL matches the whitelist.
    """
    if contamination is None:
        contamination = contamination_score(
            docs, wordlist, segmenter, seed=sample_seed
        )
    report = PrecisionReport(
        wordlist.language, contamination, applied=False, kept=len(docs)
    )
    if contamination.contaminated_fraction <= trigger_contamination:
        return list(docs), report
    report.applied = True
    report.kept = 0
    kept = []
    for doc in docs:
        if _has_wordlist_hit(doc, wordlist, segmenter):
            kept.append(doc)
            report.kept += 1
        elif url_whitelist is not None and url_whitelist.matches(doc.url):
            kept.append(doc)
            report.kept += 1
            report.url_whitelisted += 1
        else:
            report.removed += 1
    return kept, report
