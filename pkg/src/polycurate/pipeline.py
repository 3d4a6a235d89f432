"""Pipeline orchestration: stage wiring, sharded deterministic
execution, train/test splitting, and the domain-ratio report.

Stages run in the fixed order lid -> dedup -> filter -> precision ->
rehydrate. Each stage writes an immutable per-language record file plus
a stats JSON; outputs are normalized (sorted by document id at merge
points) so results are byte-identical for any shard count.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence
from urllib.parse import urlparse

import yaml

from . import dedup as dedup_mod
from . import filters as filters_mod
from . import langid as langid_mod
from . import precision as precision_mod
from . import rehydration as rehydration_mod
from .corpus import Document, LanguageKey, read_documents, write_documents
from .segmentation import DEFAULT_REGISTRY, SegmenterRegistry

SCHEMA_VERSION = 1
STAGE_ORDER = ("lid", "dedup", "filter", "precision", "rehydrate")

SPLIT_BUCKETS = 1 << 16
SPLIT_DOC_CAP = 100_000
SPLIT_FRACTION = 0.01
SPLIT_HASH_KEY = b"corpus-split"


class ConfigError(ValueError):
    pass


class StageError(RuntimeError):
    def __init__(self, stage: str, shard: int | None, cause: Exception):
        super().__init__(f"stage {stage!r} failed (shard {shard}): {cause}")
        self.stage = stage
        self.shard = shard


@dataclass
class PipelineConfig:
    input: str
    output_dir: str
    stages: list[str] = field(default_factory=lambda: list(STAGE_ORDER))
    shards: int = 1
    seed: int = 0
    strict: bool = True
    lid: dict = field(default_factory=dict)
    dedup: dict = field(default_factory=dict)
    filters: dict = field(default_factory=dict)
    precision: dict = field(default_factory=dict)
    rehydrate: dict = field(default_factory=dict)

    @classmethod
    def load(cls, path: str) -> "PipelineConfig":
        with open(path, encoding="utf-8") as f:
            raw = yaml.safe_load(f)
        if not isinstance(raw, dict):
            raise ConfigError("config must be a mapping")
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            cfg = cls(**raw)
        except TypeError as e:
            raise ConfigError(str(e)) from e
        cfg.validate()
        return cfg

    def validate(self):
        if not os.path.exists(self.input):
            raise ConfigError(f"input not found: {self.input}")
        if self.shards < 1:
            raise ConfigError("shards must be >= 1")
        order = [s for s in STAGE_ORDER if s in self.stages]
        if order != self.stages:
            raise ConfigError(
                f"stages must follow the order {list(STAGE_ORDER)}, got {self.stages}"
            )


def _shard_of(doc_id: str, shards: int) -> int:
    h = hashlib.blake2b(doc_id.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(h, "big") % shards


def _sharded(docs: Sequence[Document], shards: int) -> list[list[Document]]:
    out: list[list[Document]] = [[] for _ in range(shards)]
    for doc in docs:
        out[_shard_of(doc.id, shards)].append(doc)
    return out


def _merge_sorted(shard_outputs: Iterable[list[Document]]) -> list[Document]:
    merged = [d for shard in shard_outputs for d in shard]
    merged.sort(key=lambda d: d.id)
    return merged


@dataclass
class StageStats:
    stage: str
    docs_in: int
    docs_out: int
    detail: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "stage": self.stage,
            "docs_in": self.docs_in,
            "docs_out": self.docs_out,
            "detail": self.detail,
        }


class PipelineRunner:
    """Executes the configured stages over one input corpus."""

    def __init__(
        self,
        config: PipelineConfig,
        registry: SegmenterRegistry = DEFAULT_REGISTRY,
        segmenter_ids: dict[LanguageKey, str] | None = None,
    ):
        self.config = config
        self.registry = registry
        self.segmenter_ids = segmenter_ids or {}
        self.stats: list[StageStats] = []

    def _segmenter(self, language: LanguageKey | None) -> Callable[[str], list[str]]:
        seg_id = self.segmenter_ids.get(language, "multilingual_default")
        return self.registry.get(seg_id)

    def run(self) -> list[StageStats]:
        cfg = self.config
        os.makedirs(cfg.output_dir, exist_ok=True)
        docs = list(read_documents(cfg.input, strict=cfg.strict))
        docs.sort(key=lambda d: d.id)
        for stage in cfg.stages:
            docs_in = len(docs)
            try:
                docs = getattr(self, f"_stage_{stage}")(docs)
            except Exception as e:
                raise StageError(stage, None, e) from e
            self.stats.append(StageStats(stage, docs_in, len(docs)))
            self._persist(stage, docs)
        with open(
            os.path.join(cfg.output_dir, "stats.json"), "w", encoding="utf-8"
        ) as f:
            json.dump(
                {
                    "schema_version": SCHEMA_VERSION,
                    "stages": [s.to_dict() for s in self.stats],
                },
                f,
                indent=2,
                sort_keys=True,
            )
        return self.stats

    def _persist(self, stage: str, docs: list[Document]):
        stage_dir = os.path.join(self.config.output_dir, stage)
        os.makedirs(stage_dir, exist_ok=True)
        write_documents(docs, os.path.join(stage_dir, "corpus.jsonl"))

    # -- stages -----------------------------------------------------------

    def _stage_lid(self, docs: list[Document]) -> list[Document]:
        opts = self.config.lid
        model_path = opts.get("model")
        if model_path:
            model = langid_mod.CharNgramClassifier.load(model_path)
            shard_results = []
            for shard in _sharded(docs, self.config.shards):
                shard_results.append(list(langid_mod.annotate(iter(shard), model)))
            docs = _merge_sorted(shard_results)
        mode = opts.get("threshold_mode", "formula")
        if mode == "none":
            return docs
        if mode == "fixed":
            fixed = opts.get("fixed_thresholds", {})
            thresholds = {
                LanguageKey.parse(k): langid_mod.LidThreshold(
                    LanguageKey.parse(k), float(v), float(v), 0.0
                )
                for k, v in fixed.items()
            }
        else:
            cap = int(opts.get("reservoir_cap", langid_mod.DEFAULT_RESERVOIR_CAP))
            reservoir = langid_mod.ConfidenceReservoir(cap)
            for shard in _sharded(docs, self.config.shards):
                shard_res = langid_mod.ConfidenceReservoir(cap)
                for doc in shard:
                    if doc.language is not None and doc.lid_confidence is not None:
                        shard_res.add(doc.language, doc.lid_confidence, doc.id)
                reservoir.merge(shard_res)
            thresholds = langid_mod.derive_thresholds(reservoir)
        report = langid_mod.GateReport()
        default = opts.get("default_threshold")
        kept = list(
            langid_mod.gate(
                docs,
                thresholds,
                report,
                default_threshold=float(default) if default is not None else None,
            )
        )
        self._write_report(
            "lid",
            {
                str(lang): {
                    "kept": report.kept.get(lang, 0),
                    "removed": report.removed.get(lang, 0),
                    "threshold": t.value,
                    "median": t.median,
                    "stddev": t.stddev,
                }
                for lang, t in sorted(thresholds.items())
            },
        )
        return kept

    def _stage_dedup(self, docs: list[Document]) -> list[Document]:
        opts = self.config.dedup
        cfg = dedup_mod.MinHashConfig(
            bands=int(opts.get("bands", 14)),
            rows_per_band=int(opts.get("rows_per_band", 8)),
            ngram_size=int(opts.get("ngram_size", 5)),
            seed=int(opts.get("seed", self.config.seed)),
        )
        by_lang: dict[LanguageKey | None, list[Document]] = defaultdict(list)
        for doc in docs:
            by_lang[doc.language].append(doc)
        out: list[Document] = []
        histogram: dict[str, dict[int, int]] = {}
        for lang in sorted(by_lang, key=lambda k: str(k) if k else ""):
            group = by_lang[lang]
            seg = self._segmenter(lang)
            signed = []
            for doc in group:
                try:
                    signed.append((doc.id, dedup_mod.signature(doc.text, seg, cfg)))
                except dedup_mod.TooShortDocument:
                    pass
            clusters = dedup_mod.cluster(signed)
            out.extend(dedup_mod.deduplicate(group, clusters))
            histogram[str(lang)] = dedup_mod.cluster_size_histogram(clusters)
        out.sort(key=lambda d: d.id)
        self._write_report("dedup", histogram)
        return out

    def _stage_filter(self, docs: list[Document]) -> list[Document]:
        opts = self.config.filters
        suites: dict[LanguageKey, list[filters_mod.FilterSpec]] = {}
        for lang_s, path in opts.get("suites", {}).items():
            with open(path, encoding="utf-8") as f:
                suites[LanguageKey.parse(lang_s)] = [
                    filters_mod.FilterSpec.from_dict(d) for d in json.load(f)
                ]
        stopwords: dict[LanguageKey, set[str]] = {}
        for lang_s, path in opts.get("stopwords", {}).items():
            with open(path, encoding="utf-8") as f:
                stopwords[LanguageKey.parse(lang_s)] = {
                    w.strip().lower() for w in f if w.strip()
                }
        default_suite = [
            filters_mod.FilterSpec(m, d, t) for m, d, t in filters_mod.FIXED_FILTERS
        ]
        by_lang: dict[LanguageKey | None, list[Document]] = defaultdict(list)
        for doc in docs:
            by_lang[doc.language].append(doc)
        annotated: list[Document] = []
        reports = {}
        for lang in sorted(by_lang, key=lambda k: str(k) if k else ""):
            suite = suites.get(lang, default_suite)
            sw = stopwords.get(lang)
            if sw is None:
                # No stopword list: drop the stopword-count filter rather
                # than failing every document.
                suite = [s for s in suite if s.metric_id != "stopword_count"]
            rep = filters_mod.FilterReport()
            annotated.extend(
                filters_mod.apply_filters(
                    by_lang[lang], suite, self._segmenter(lang), sw, rep
                )
            )
            reports[str(lang)] = rep.to_dict()
        annotated.sort(key=lambda d: d.id)
        self._write_report("filter", reports)
        # The full annotated stream is persisted for rehydration; kept
        # documents flow to the next stage.
        self._annotated = annotated
        stage_dir = os.path.join(self.config.output_dir, "filter")
        os.makedirs(stage_dir, exist_ok=True)
        write_documents(annotated, os.path.join(stage_dir, "annotated.jsonl"))
        return [d for d in annotated if filters_mod.passes_all(d)]

    def _stage_precision(self, docs: list[Document]) -> list[Document]:
        opts = self.config.precision
        wordlist_paths = opts.get("wordlists", {})
        if not wordlist_paths:
            return docs
        whitelist_paths = opts.get("url_whitelists", {})
        gamma = float(opts.get("gamma", precision_mod.DEFAULT_GAMMA))
        trigger = float(
            opts.get("trigger", precision_mod.DEFAULT_CONTAMINATION_TRIGGER)
        )
        by_lang: dict[LanguageKey | None, list[Document]] = defaultdict(list)
        for doc in docs:
            by_lang[doc.language].append(doc)
        out: list[Document] = []
        reports = {}
        for lang in sorted(by_lang, key=lambda k: str(k) if k else ""):
            group = by_lang[lang]
            lang_s = str(lang)
            if lang is None or lang_s not in wordlist_paths:
                out.extend(group)
                continue
            with open(wordlist_paths[lang_s], encoding="utf-8") as f:
                words = {w.strip().lower() for w in f if w.strip()}
            wordlist = precision_mod.AffinityWordlist(lang, words, gamma)
            whitelist = None
            if lang_s in whitelist_paths:
                with open(whitelist_paths[lang_s], encoding="utf-8") as f:
                    terms = [t.strip() for t in f if t.strip()]
                whitelist = precision_mod.UrlWhitelist(lang, terms)
            kept, rep = precision_mod.precision_filter(
                group,
                wordlist,
                self._segmenter(lang),
                url_whitelist=whitelist,
                trigger_contamination=trigger,
                sample_seed=self.config.seed,
            )
            out.extend(kept)
            reports[lang_s] = rep.to_dict()
        out.sort(key=lambda d: d.id)
        self._write_report("precision", reports)
        return out

    def _stage_rehydrate(self, docs: list[Document]) -> list[Document]:
        annotated = getattr(self, "_annotated", None)
        if annotated is None:
            raise ConfigError("rehydrate requires the filter stage to have run")
        kept_ids = {d.id for d in docs}
        # Rates come from the full annotated stream; weights apply to
        # the surviving documents.
        by_lang: dict[LanguageKey | None, list[Document]] = defaultdict(list)
        for doc in annotated:
            by_lang[doc.language].append(doc)
        out: list[Document] = []
        weight_tables = {}
        for lang in sorted(by_lang, key=lambda k: str(k) if k else ""):
            rates = rehydration_mod.filtering_rates_by_size(by_lang[lang])
            weights = rehydration_mod.derive_weights(rates)
            weight_tables[str(lang)] = weights.to_dict()
            survivors = [d for d in by_lang[lang] if d.id in kept_ids]
            survivors.sort(key=lambda d: d.id)
            out.extend(rehydration_mod.rehydrate(survivors, weights))
        self._write_report("rehydrate", weight_tables)
        return out

    def _write_report(self, stage: str, payload: dict):
        stage_dir = os.path.join(self.config.output_dir, stage)
        os.makedirs(stage_dir, exist_ok=True)
        with open(
            os.path.join(stage_dir, "report.json"), "w", encoding="utf-8"
        ) as f:
            json.dump(
                {"schema_version": SCHEMA_VERSION, "report": payload},
                f,
                indent=2,
                sort_keys=True,
                ensure_ascii=False,
            )


def run_pipeline(
    config: PipelineConfig,
    registry: SegmenterRegistry = DEFAULT_REGISTRY,
    segmenter_ids: dict[LanguageKey, str] | None = None,
) -> list[StageStats]:
    return PipelineRunner(config, registry, segmenter_ids).run()


# ---------------------------------------------------------------------------
# Train/test split


def split_bucket(text: str) -> int:
    h = hashlib.blake2b(
        text.encode("utf-8"), digest_size=8, key=SPLIT_HASH_KEY
    ).digest()
    return int.from_bytes(h, "big") % SPLIT_BUCKETS


def train_test_split(
    docs: Sequence[Document],
    fraction_cap: float = SPLIT_FRACTION,
    doc_cap: int = SPLIT_DOC_CAP,
    min_corpus_size: int = 1000,
) -> tuple[list[Document], list[Document]]:
    """Content-hash split: test holds min(1%, 100k) of the documents.

    Membership depends only on document text, so reruns and shard
    layouts agree. Corpora below ``min_corpus_size`` get no test split.
    """
    n = len(docs)
    if n < min_corpus_size:
        return list(docs), []
    fraction = min(fraction_cap, doc_cap / n)
    selected = max(1, math.floor(fraction * SPLIT_BUCKETS))
    train, test = [], []
    for doc in docs:
        (test if split_bucket(doc.text) < selected else train).append(doc)
    return train, test


# ---------------------------------------------------------------------------
# Domain-ratio report


def _host_matches(host: str, domain: str) -> bool:
    host = host.lower().rstrip(".")
    domain = domain.lower()
    return host == domain or host.endswith("." + domain)


def domain_ratio_report(
    docs: Iterable[Document], domains: Sequence[str]
) -> dict[str, dict]:
    """Per-language fraction of documents hosted on the listed domains."""
    totals: dict[str, int] = defaultdict(int)
    matches: dict[str, int] = defaultdict(int)
    unparsable = 0
    for doc in docs:
        lang = str(doc.language) if doc.language else "unknown"
        totals[lang] += 1
        try:
            host = urlparse(doc.url).hostname or ""
        except ValueError:
            unparsable += 1
            continue
        if not host:
            unparsable += 1
            continue
        if any(_host_matches(host, d) for d in domains):
            matches[lang] += 1
    return {
        "schema_version": SCHEMA_VERSION,
        "languages": {
            lang: {
                "documents": totals[lang],
                "matched": matches[lang],
                "fraction": matches[lang] / totals[lang],
            }
            for lang in sorted(totals)
        },
        "unparsable_urls": unparsable,
    }
