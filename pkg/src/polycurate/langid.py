"""Language identification: classifier interface, confidence-threshold
derivation, and corpus gating.

The pipeline consumes any classifier exposing ``predict(text)``; a small
character n-gram model is bundled for tests and fixtures. Per-language
confidence thresholds come from the score distribution of documents
predicted as that language: one standard deviation below the median,
clipped to [0.3, 0.9].
"""

from __future__ import annotations

import hashlib
import json
import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Protocol

from .corpus import UND, Document, LanguageKey

THRESHOLD_FLOOR = 0.3
THRESHOLD_CEIL = 0.9
DEFAULT_RESERVOIR_CAP = 1_000_000


class EmptyTextError(ValueError):
    pass


class EmptyDistributionError(ValueError):
    pass


class MissingThresholdError(KeyError):
    def __init__(self, language: LanguageKey):
        super().__init__(f"no threshold for language {language}")
        self.language = language


@dataclass(frozen=True)
class LidPrediction:
    language: LanguageKey
    confidence: float


class Classifier(Protocol):
    def predict(self, text: str) -> LidPrediction: ...


class CharNgramClassifier:
    """Closed-world character n-gram naive-Bayes language classifier.

    Small and deterministic; meant for tests and synthetic corpora, not
    production LID. Texts whose characters are mostly outside the
    training alphabet are labeled with the reserved ``und`` key.
    """

    def __init__(
        self,
        ngram: int = 3,
        log_probs: dict[str, dict[str, float]] | None = None,
        alphabet: set[str] | None = None,
    ):
        self.ngram = ngram
        self.log_probs: dict[str, dict[str, float]] = log_probs or {}
        self.alphabet: set[str] = alphabet or set()

    @staticmethod
    def _ngrams(text: str, n: int) -> list[str]:
        padded = f" {text.lower().strip()} "
        return [padded[i : i + n] for i in range(max(0, len(padded) - n + 1))]

    @classmethod
    def train(
        cls, labeled_texts: Iterable[tuple[LanguageKey, str]], ngram: int = 3
    ) -> "CharNgramClassifier":
        counts: dict[str, Counter] = defaultdict(Counter)
        alphabet: set[str] = set()
        for lang, text in labeled_texts:
            counts[str(lang)].update(cls._ngrams(text, ngram))
            alphabet.update(text.lower())
        log_probs = {}
        for lang, ctr in counts.items():
            total = sum(ctr.values())
            vocab = len(ctr) + 1
            log_probs[lang] = {
                g: math.log((c + 1) / (total + vocab)) for g, c in ctr.items()
            }
            log_probs[lang]["\x00unk"] = math.log(1 / (total + vocab))
        return cls(ngram=ngram, log_probs=log_probs, alphabet=alphabet)

    def predict_ranked(self, text: str) -> list[LidPrediction]:
        if not text.strip():
            raise EmptyTextError("cannot classify empty text")
        known = sum(1 for ch in text.lower() if not ch.isspace())
        covered = sum(
            1 for ch in text.lower() if not ch.isspace() and ch in self.alphabet
        )
        if known == 0 or covered / known < 0.5:
            return [LidPrediction(UND, 1.0)]
        grams = self._ngrams(text, self.ngram)
        scores = {}
        for lang, probs in self.log_probs.items():
            unk = probs["\x00unk"]
            total = sum(probs.get(g, unk) for g in grams)
            scores[lang] = total / max(1, len(grams))
        # Softmax over per-gram average log-likelihoods.
        mx = max(scores.values())
        exp = {lang: math.exp(12.0 * (s - mx)) for lang, s in scores.items()}
        z = sum(exp.values())
        ranked = sorted(exp.items(), key=lambda kv: (-kv[1], kv[0]))
        return [LidPrediction(LanguageKey.parse(l), v / z) for l, v in ranked]

    def predict(self, text: str) -> LidPrediction:
        return self.predict_ranked(text)[0]

    def save(self, path: str):
        with open(path, "w", encoding="utf-8") as f:
            json.dump(
                {
                    "ngram": self.ngram,
                    "log_probs": self.log_probs,
                    "alphabet": sorted(self.alphabet),
                },
                f,
                ensure_ascii=False,
            )

    @classmethod
    def load(cls, path: str) -> "CharNgramClassifier":
        with open(path, encoding="utf-8") as f:
            d = json.load(f)
        return cls(
            ngram=d["ngram"], log_probs=d["log_probs"], alphabet=set(d["alphabet"])
        )


def classify(doc: Document, model: Classifier) -> LidPrediction:
    if not doc.text.strip():
        raise EmptyTextError(f"document {doc.id} has empty text")
    return model.predict(doc.text)


def annotate(docs: Iterable[Document], model: Classifier) -> Iterator[Document]:
    for doc in docs:
        pred = classify(doc, model)
        doc.language = pred.language
        doc.lid_confidence = pred.confidence
        yield doc


@dataclass
class ConfidenceDistribution:
    language: LanguageKey
    samples: list[float] = field(default_factory=list)


@dataclass(frozen=True)
class LidThreshold:
    language: LanguageKey
    value: float
    median: float
    stddev: float


def _median(xs: list[float]) -> float:
    s = sorted(xs)
    n = len(s)
    mid = n // 2
    if n % 2:
        return s[mid]
    return (s[mid - 1] + s[mid]) / 2.0


def _pstdev(xs: list[float]) -> float:
    n = len(xs)
    mu = sum(xs) / n
    return math.sqrt(sum((x - mu) ** 2 for x in xs) / n)


def derive_threshold(dist: ConfidenceDistribution) -> LidThreshold:
    """Threshold = clamp(median - population stddev, 0.3, 0.9)."""
    if not dist.samples:
        raise EmptyDistributionError(f"no confidence samples for {dist.language}")
    med = _median(dist.samples)
    sd = _pstdev(dist.samples)
    value = max(THRESHOLD_FLOOR, min(THRESHOLD_CEIL, med - sd))
    return LidThreshold(dist.language, value, med, sd)


class ConfidenceReservoir:
    """Bounded per-language confidence sample, stable across sharding.

    Keeps the ``cap`` samples whose document-id hashes are smallest (a
    bottom-k sample): deterministic, order-independent, and mergeable,
    so any shard layout collects the same final sample.
    """

    def __init__(self, cap: int = DEFAULT_RESERVOIR_CAP):
        self.cap = cap
        self._entries: dict[LanguageKey, list[tuple[int, float]]] = defaultdict(list)

    @staticmethod
    def _key(doc_id: str) -> int:
        return int.from_bytes(
            hashlib.blake2b(doc_id.encode("utf-8"), digest_size=8).digest(), "big"
        )

    def add(self, language: LanguageKey, confidence: float, doc_id: str):
        entries = self._entries[language]
        entries.append((self._key(doc_id), confidence))
        if len(entries) > 2 * self.cap:
            entries.sort()
            del entries[self.cap :]

    def merge(self, other: "ConfidenceReservoir"):
        for lang, entries in other._entries.items():
            self._entries[lang].extend(entries)

    def distributions(self) -> dict[LanguageKey, ConfidenceDistribution]:
        out = {}
        for lang, entries in self._entries.items():
            entries.sort()
            samples = [c for _, c in entries[: self.cap]]
            out[lang] = ConfidenceDistribution(lang, samples)
        return out


def derive_thresholds(
    reservoir: ConfidenceReservoir,
) -> dict[LanguageKey, LidThreshold]:
    return {
        lang: derive_threshold(dist)
        for lang, dist in reservoir.distributions().items()
        if lang != UND
    }


@dataclass
class GateReport:
    kept: dict[LanguageKey, int] = field(default_factory=dict)
    removed: dict[LanguageKey, int] = field(default_factory=dict)

    def removal_rate(self, language: LanguageKey) -> float:
        k = self.kept.get(language, 0)
        r = self.removed.get(language, 0)
        return r / (k + r) if k + r else 0.0


def gate(
    docs: Iterable[Document],
    thresholds: dict[LanguageKey, LidThreshold],
    report: GateReport | None = None,
    default_threshold: float | None = None,
) -> Iterator[Document]:
    """Keep documents whose confidence meets their language's threshold.

    Documents labeled with the reserved ``und`` key are always dropped.
    A missing threshold raises unless ``default_threshold`` is given.
    """
    rep = report if report is not None else GateReport()
    for doc in docs:
        if doc.language is None or doc.lid_confidence is None:
            raise ValueError(f"document {doc.id} has no LID prediction")
        lang = doc.language
        if lang == UND:
            rep.removed[lang] = rep.removed.get(lang, 0) + 1
            continue
        if lang in thresholds:
            t = thresholds[lang].value
        elif default_threshold is not None:
            t = default_threshold
        else:
            raise MissingThresholdError(lang)
        if doc.lid_confidence >= t:
            rep.kept[lang] = rep.kept.get(lang, 0) + 1
            yield doc
        else:
            rep.removed[lang] = rep.removed.get(lang, 0) + 1
