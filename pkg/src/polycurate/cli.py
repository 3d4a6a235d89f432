"""Command-line interface for the curation pipeline.

Exit codes: 0 success, 1 validation error, 2 runtime failure.
"""

from __future__ import annotations

import csv
import json
import sys
from collections import defaultdict

import click

from . import dedup as dedup_mod
from . import evalselect as evalselect_mod
from . import filters as filters_mod
from . import langid as langid_mod
from . import precision as precision_mod
from . import rehydration as rehydration_mod
from .corpus import Document, LanguageKey, read_documents, write_documents
from .pipeline import (
    SCHEMA_VERSION,
    ConfigError,
    PipelineConfig,
    domain_ratio_report,
    run_pipeline,
    train_test_split,
)
from .segmentation import DEFAULT_REGISTRY


def _fail(code: int, message: str):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _load_docs(path: str, strict: bool) -> list[Document]:
    errors = [0]
    docs = list(read_documents(path, strict=strict, error_counter=errors))
    if errors[0]:
        click.echo(f"skipped {errors[0]} unparsable records", err=True)
    return docs


def _dump_json(obj, path: str | None):
    payload = json.dumps(
        {"schema_version": SCHEMA_VERSION, **obj},
        indent=2,
        sort_keys=True,
        ensure_ascii=False,
    )
    if path:
        with open(path, "w", encoding="utf-8") as f:
            f.write(payload + "\n")
    else:
        click.echo(payload)


@click.group()
def main():
    """Language-adaptive corpus curation pipeline."""


@main.command()
@click.option("--input", "input_path", required=True, type=click.Path(exists=True))
@click.option("--output", "output_path", required=True, type=click.Path())
@click.option("--model", "model_path", required=True, type=click.Path(exists=True))
@click.option(
    "--threshold-mode",
    type=click.Choice(["formula", "fixed", "none"]),
    default="formula",
)
@click.option("--fixed-thresholds", type=click.Path(exists=True), default=None,
              help="JSON map language -> threshold (for --threshold-mode fixed)")
@click.option("--reservoir-cap", type=int, default=langid_mod.DEFAULT_RESERVOIR_CAP)
@click.option("--report", "report_path", type=click.Path(), default=None)
@click.option("--lenient", is_flag=True, help="skip unparsable input records")
def lid(input_path, output_path, model_path, threshold_mode, fixed_thresholds,
        reservoir_cap, report_path, lenient):
    """Annotate documents with language predictions and gate by threshold."""
    model = langid_mod.CharNgramClassifier.load(model_path)
    docs = _load_docs(input_path, strict=not lenient)
    docs = list(langid_mod.annotate(iter(docs), model))
    thresholds: dict[LanguageKey, langid_mod.LidThreshold] = {}
    if threshold_mode == "formula":
        reservoir = langid_mod.ConfidenceReservoir(reservoir_cap)
        for d in docs:
            reservoir.add(d.language, d.lid_confidence, d.id)
        thresholds = langid_mod.derive_thresholds(reservoir)
    elif threshold_mode == "fixed":
        if not fixed_thresholds:
            _fail(1, "--fixed-thresholds required for fixed mode")
        with open(fixed_thresholds, encoding="utf-8") as f:
            table = json.load(f)
        thresholds = {
            LanguageKey.parse(k): langid_mod.LidThreshold(
                LanguageKey.parse(k), float(v), float(v), 0.0
            )
            for k, v in table.items()
        }
    report = langid_mod.GateReport()
    if threshold_mode == "none":
        kept = [d for d in docs if d.language != langid_mod.UND]
    else:
        kept = list(langid_mod.gate(docs, thresholds, report, default_threshold=0.0))
    write_documents(kept, output_path)
    if report_path:
        _dump_json(
            {
                "languages": {
                    str(lang): {
                        "kept": report.kept.get(lang, 0),
                        "removed": report.removed.get(lang, 0),
                        "threshold": t.value,
                        "median": t.median,
                        "stddev": t.stddev,
                    }
                    for lang, t in sorted(thresholds.items())
                }
            },
            report_path,
        )


@main.command()
@click.option("--input", "input_path", required=True, type=click.Path(exists=True))
@click.option("--output", "output_path", required=True, type=click.Path())
@click.option("--bands", type=int, default=14)
@click.option("--rows-per-band", type=int, default=8)
@click.option("--ngram-size", type=int, default=5)
@click.option("--seed", type=int, default=0)
@click.option("--histogram", "histogram_path", type=click.Path(), default=None,
              help="cluster-size histogram JSON (size -> count)")
def dedup(input_path, output_path, bands, rows_per_band, ngram_size, seed,
          histogram_path):
    """Per-language MinHash near-deduplication."""
    cfg = dedup_mod.MinHashConfig(bands, rows_per_band, ngram_size, seed)
    docs = _load_docs(input_path, strict=True)
    by_lang = defaultdict(list)
    for d in docs:
        by_lang[d.language].append(d)
    seg = DEFAULT_REGISTRY.get("multilingual_default")
    out = []
    histogram: dict[str, dict[int, int]] = {}
    for lang in sorted(by_lang, key=lambda k: str(k) if k else ""):
        group = by_lang[lang]
        signed = []
        for d in group:
            try:
                signed.append((d.id, dedup_mod.signature(d.text, seg, cfg)))
            except dedup_mod.TooShortDocument:
                pass
        clusters = dedup_mod.cluster(signed)
        out.extend(dedup_mod.deduplicate(group, clusters))
        histogram[str(lang)] = dedup_mod.cluster_size_histogram(clusters)
    out.sort(key=lambda d: d.id)
    write_documents(out, output_path)
    if histogram_path:
        _dump_json({"histogram": histogram}, histogram_path)


@main.command("filter")
@click.option("--input", "input_path", required=True, type=click.Path(exists=True))
@click.option("--output", "output_path", required=True, type=click.Path())
@click.option("--annotated", "annotated_path", type=click.Path(), default=None,
              help="write the verdict-annotated stream (failures included)")
@click.option("--suite", "suite_path", type=click.Path(exists=True), default=None,
              help="JSON list of filter specs; defaults to the fixed catalog")
@click.option("--stopwords", "stopword_path", type=click.Path(exists=True),
              default=None, help="stopword list, one word per line")
@click.option("--report", "report_path", type=click.Path(), default=None)
def filter_cmd(input_path, output_path, annotated_path, suite_path,
               stopword_path, report_path):
    """Apply quality filters and record per-document verdicts."""
    if suite_path:
        with open(suite_path, encoding="utf-8") as f:
            suite = [filters_mod.FilterSpec.from_dict(d) for d in json.load(f)]
    else:
        suite = [
            filters_mod.FilterSpec(m, d, t) for m, d, t in filters_mod.FIXED_FILTERS
        ]
    stopwords = None
    if stopword_path:
        with open(stopword_path, encoding="utf-8") as f:
            stopwords = {w.strip().lower() for w in f if w.strip()}
    else:
        suite = [s for s in suite if s.metric_id != "stopword_count"]
    docs = _load_docs(input_path, strict=True)
    seg = DEFAULT_REGISTRY.get("multilingual_default")
    rep = filters_mod.FilterReport()
    annotated = list(filters_mod.apply_filters(docs, suite, seg, stopwords, rep))
    kept = [d for d in annotated if filters_mod.passes_all(d)]
    write_documents(kept, output_path)
    if annotated_path:
        write_documents(annotated, annotated_path)
    if report_path:
        _dump_json(rep.to_dict(), report_path)


@main.command()
@click.option("--input", "input_path", required=True, type=click.Path(exists=True))
@click.option("--output", "output_path", required=True, type=click.Path(),
              help="stopword list output, one word per line")
@click.option("--frequency-threshold", type=float,
              default=filters_mod.DEFAULT_STOPWORD_FREQUENCY)
def stopwords(input_path, output_path, frequency_threshold):
    """Derive a stopword list from a (cleaned) reference corpus."""
    docs = _load_docs(input_path, strict=True)
    seg = DEFAULT_REGISTRY.get("multilingual_default")
    result = filters_mod.derive_stopwords(docs, seg, frequency_threshold)
    with open(output_path, "w", encoding="utf-8") as f:
        for w in result.words:
            f.write(w + "\n")
    click.echo(
        f"{len(result.words)} stopwords "
        f"(frequency threshold {result.frequency_threshold_used:g})"
    )


@main.command()
@click.option("--language", required=True, help="target language key, e.g. fra_Latn")
@click.option("--reference", "references", multiple=True, required=True,
              help="NAME=PATH reference corpus (wikipedia/glotlid_corpus/common_crawl)")
@click.option("--english-reference", "english_references", multiple=True,
              help="NAME=PATH English reference corpus")
@click.option("--output", "output_path", required=True, type=click.Path())
def thresholds(language, references, english_references, output_path):
    """Build the per-language filter suite (fixed + adapted thresholds)."""
    lang = LanguageKey.parse(language)
    seg = DEFAULT_REGISTRY.get("multilingual_default")

    def collect(specs) -> dict[str, dict[str, filters_mod.MetricDistribution]]:
        out: dict[str, dict[str, filters_mod.MetricDistribution]] = {}
        for spec in specs:
            name, _, path = spec.partition("=")
            if not path:
                _fail(1, f"bad reference spec (want NAME=PATH): {spec}")
            dists: dict[str, list[float]] = defaultdict(list)
            for doc in read_documents(path, strict=True):
                for metric, value in filters_mod.compute_metrics(doc, seg).items():
                    dists[metric].append(value)
            out[name] = {
                metric: filters_mod.MetricDistribution(metric, lang, name, values)
                for metric, values in dists.items()
            }
        return out

    suite = filters_mod.build_filter_suite(
        lang, collect(references), collect(english_references) or None
    )
    with open(output_path, "w", encoding="utf-8") as f:
        json.dump([s.to_dict() for s in suite], f, indent=2, sort_keys=True)


@main.command()
@click.option("--input", "input_path", required=True, type=click.Path(exists=True))
@click.option("--output", "output_path", required=True, type=click.Path())
@click.option("--language", required=True)
@click.option("--wordlist", "wordlist_path", required=True,
              type=click.Path(exists=True), help="one token per line")
@click.option("--url-whitelist", "whitelist_path", type=click.Path(exists=True),
              default=None, help="one term per line")
@click.option("--gamma", type=float, default=precision_mod.DEFAULT_GAMMA)
@click.option("--trigger", type=float,
              default=precision_mod.DEFAULT_CONTAMINATION_TRIGGER)
@click.option("--sample-seed", type=int, default=0)
@click.option("--report", "report_path", type=click.Path(), default=None)
def precision(input_path, output_path, language, wordlist_path, whitelist_path,
              gamma, trigger, sample_seed, report_path):
    """Wordlist precision filtering for low-resource languages."""
    lang = LanguageKey.parse(language)
    with open(wordlist_path, encoding="utf-8") as f:
        words = {w.strip().lower() for w in f if w.strip()}
    wordlist = precision_mod.AffinityWordlist(lang, words, gamma)
    whitelist = None
    if whitelist_path:
        with open(whitelist_path, encoding="utf-8") as f:
            whitelist = precision_mod.UrlWhitelist(
                lang, [t.strip() for t in f if t.strip()]
            )
    docs = _load_docs(input_path, strict=True)
    docs.sort(key=lambda d: d.id)
    seg = DEFAULT_REGISTRY.get("multilingual_default")
    kept, rep = precision_mod.precision_filter(
        docs, wordlist, seg, whitelist, trigger, sample_seed=sample_seed
    )
    write_documents(kept, output_path)
    if report_path:
        _dump_json(rep.to_dict(), report_path)


@main.command()
@click.option("--annotated", "annotated_path", required=True,
              type=click.Path(exists=True),
              help="filter stage's verdict-annotated stream")
@click.option("--output", "output_path", required=True, type=click.Path())
@click.option("--weights", "weights_path", type=click.Path(), default=None,
              help="weight table JSON output (size -> weight)")
def rehydrate(annotated_path, output_path, weights_path):
    """Upsample kept documents by cluster-size filtering rates."""
    annotated = _load_docs(annotated_path, strict=True)
    rates = rehydration_mod.filtering_rates_by_size(annotated)
    weights = rehydration_mod.derive_weights(rates)
    survivors = sorted(
        (d for d in annotated if filters_mod.passes_all(d)), key=lambda d: d.id
    )
    write_documents(rehydration_mod.rehydrate(survivors, weights), output_path)
    if weights_path:
        _dump_json({"weights": weights.to_dict()}, weights_path)


@main.command()
@click.option("--input", "input_path", required=True, type=click.Path(exists=True))
@click.option("--train", "train_path", required=True, type=click.Path())
@click.option("--test", "test_path", required=True, type=click.Path())
@click.option("--min-corpus-size", type=int, default=1000)
def split(input_path, train_path, test_path, min_corpus_size):
    """Content-hash train/test split (test = min(1%, 100k) documents)."""
    docs = _load_docs(input_path, strict=True)
    train, test = train_test_split(docs, min_corpus_size=min_corpus_size)
    write_documents(train, train_path)
    write_documents(test, test_path)
    click.echo(f"train {len(train)}  test {len(test)}")


@main.command()
@click.option("--traces", "traces_path", required=True, type=click.Path(exists=True))
@click.option("--seed-models", required=True,
              help="comma-separated model ids of the seed-variant set")
@click.option("--output-json", type=click.Path(), default=None)
@click.option("--output-csv", type=click.Path(), default=None)
def evalselect(traces_path, seed_models, output_json, output_csv):
    """Score benchmark tasks on the early-signal criteria."""
    seed_set = {m.strip() for m in seed_models.split(",") if m.strip()}
    traces = evalselect_mod.read_traces(traces_path)
    ref: dict[str, list] = defaultdict(list)
    seeds: dict[str, list] = defaultdict(list)
    for t in traces:
        (seeds if t.model_id in seed_set else ref)[t.task_id].append(t)
    criteria = evalselect_mod.select_tasks(ref, seeds)
    rows = [c.to_dict() for c in criteria]
    if output_json:
        _dump_json({"tasks": rows}, output_json)
    if output_csv:
        with open(output_csv, "w", newline="", encoding="utf-8") as f:
            writer = csv.DictWriter(f, fieldnames=list(rows[0].keys()))
            writer.writeheader()
            writer.writerows(rows)
    for c in criteria:
        click.echo(f"{c.task_id}\t{'pass' if c.selected else 'fail'}")


@main.command()
@click.option("--traces", "traces_path", required=True, type=click.Path(exists=True))
@click.option("--output", "output_path", type=click.Path(), default=None)
def aggregate(traces_path, output_path):
    """Per-model aggregate scores from final-step task scores."""
    traces = evalselect_mod.read_traces(traces_path)
    by_model: dict[str, list] = defaultdict(list)
    for t in traces:
        by_model[t.model_id].append((t.category, t.scores[-1], t.random_baseline))
    scores = {
        model: evalselect_mod.aggregate_score(entries)
        for model, entries in sorted(by_model.items())
    }
    _dump_json({"aggregate_scores": scores}, output_path)


@main.command()
@click.option("--input", "input_path", required=True, type=click.Path(exists=True))
@click.option("--domains", "domains_path", required=True,
              type=click.Path(exists=True), help="domain list, one per line")
@click.option("--output", "output_path", type=click.Path(), default=None)
def report(input_path, domains_path, output_path):
    """Per-language fraction of documents on listed domains."""
    with open(domains_path, encoding="utf-8") as f:
        domains = [d.strip() for d in f if d.strip()]
    docs = _load_docs(input_path, strict=True)
    _dump_json(domain_ratio_report(docs, domains), output_path)


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
def run(config_path):
    """Run the full configured pipeline."""
    try:
        config = PipelineConfig.load(config_path)
    except ConfigError as e:
        _fail(1, str(e))
    try:
        stats = run_pipeline(config)
    except Exception as e:
        _fail(2, str(e))
    for s in stats:
        click.echo(f"{s.stage}: {s.docs_in} -> {s.docs_out}")


if __name__ == "__main__":
    main()
