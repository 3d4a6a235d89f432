"""Language-adaptive corpus curation pipeline.

Turns a raw multilingual document stream into per-language cleaned,
deduplicated, quality-filtered, and rehydration-weighted corpora, with
per-language parameters derived automatically from data statistics, and
selects early-signal benchmark tasks from evaluation traces.
"""

from .corpus import (
    CorpusStats,
    Document,
    LanguageKey,
    parse_language_key,
    read_documents,
    write_documents,
)

__version__ = "0.1.0"

__all__ = [
    "CorpusStats",
    "Document",
    "LanguageKey",
    "parse_language_key",
    "read_documents",
    "write_documents",
]
