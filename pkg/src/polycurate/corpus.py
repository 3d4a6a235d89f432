"""Document data model and streaming newline-delimited JSON record I/O.

Every pipeline stage reads and writes the same record format: one JSON
object per line, optionally gzip/zstd compressed by file extension.
Unknown fields are preserved so external metadata survives the pipeline.
"""

from __future__ import annotations

import gzip
import hashlib
import io
import json
import re
from dataclasses import dataclass, field
from typing import IO, Any, Iterable, Iterator

_LANG_KEY_RE = re.compile(r"^([a-z]{3})_([A-Z][a-z]{3})$")

# Known record fields, written in this order for deterministic output.
_FIELD_ORDER = (
    "id",
    "url",
    "text",
    "language",
    "lid_confidence",
    "cluster_size",
    "filter_verdicts",
    "weight",
)


class MalformedLanguageKey(ValueError):
    """Raised when a language key string is not of the 'lang_Script' form."""


class RecordParseError(ValueError):
    """Raised for an unparsable record line; carries the 1-based line number."""

    def __init__(self, line_number: int, message: str):
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


@dataclass(frozen=True, order=True)
class LanguageKey:
    """An (ISO-639-3, ISO-15924) pair identifying one language-script corpus."""

    lang: str
    script: str

    def __post_init__(self):
        if not re.fullmatch(r"[a-z]{3}", self.lang):
            raise MalformedLanguageKey(f"bad ISO-639-3 code: {self.lang!r}")
        if not re.fullmatch(r"[A-Z][a-z]{3}", self.script):
            raise MalformedLanguageKey(f"bad ISO-15924 code: {self.script!r}")

    def __str__(self) -> str:
        return f"{self.lang}_{self.script}"

    @classmethod
    def parse(cls, s: str) -> "LanguageKey":
        m = _LANG_KEY_RE.match(s)
        if not m:
            raise MalformedLanguageKey(f"not a 'lang_Script' key: {s!r}")
        return cls(m.group(1), m.group(2))


# Reserved key for noise / unsupported-script predictions.
UND = LanguageKey("und", "Zzzz")


def parse_language_key(s: str) -> LanguageKey:
    return LanguageKey.parse(s)


@dataclass
class Document:
    """One extracted-text web document with pipeline annotations.

    Optional fields are filled in as the document moves through the
    stages: ``language``/``lid_confidence`` after LID, ``cluster_size``
    after dedup, ``filter_verdicts`` after filtering, ``weight`` after
    rehydration. ``extra`` holds unknown input fields verbatim.
    """

    id: str
    url: str = ""
    text: str = ""
    language: LanguageKey | None = None
    lid_confidence: float | None = None
    cluster_size: int | None = None
    filter_verdicts: dict[str, bool] | None = None
    weight: int | None = None
    extra: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.cluster_size is not None and self.cluster_size < 1:
            raise ValueError("cluster_size must be >= 1")
        if self.weight is not None and self.weight < 1:
            raise ValueError("weight must be >= 1")

    def to_dict(self) -> dict[str, Any]:
        d: dict[str, Any] = {"id": self.id, "url": self.url, "text": self.text}
        if self.language is not None:
            d["language"] = str(self.language)
        if self.lid_confidence is not None:
            d["lid_confidence"] = self.lid_confidence
        if self.cluster_size is not None:
            d["cluster_size"] = self.cluster_size
        if self.filter_verdicts is not None:
            d["filter_verdicts"] = self.filter_verdicts
        if self.weight is not None:
            d["weight"] = self.weight
        for k in sorted(self.extra):
            d[k] = self.extra[k]
        return d

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "Document":
        known = {k: d[k] for k in _FIELD_ORDER if k in d}
        extra = {k: v for k, v in d.items() if k not in _FIELD_ORDER}
        if "id" not in known:
            known["id"] = derive_id(d.get("url", ""), d.get("text", ""))
        lang = known.get("language")
        if isinstance(lang, str):
            known["language"] = LanguageKey.parse(lang)
        return cls(extra=extra, **known)


def derive_id(url: str, text: str) -> str:
    """Deterministic fallback identifier for records arriving without one."""
    h = hashlib.blake2b(digest_size=16)
    h.update(url.encode("utf-8"))
    h.update(b"\x00")
    h.update(text.encode("utf-8"))
    return h.hexdigest()


@dataclass
class CorpusStats:
    document_count: int = 0
    word_count: int = 0
    byte_count: int = 0
    per_stage_removal: dict[str, float] = field(default_factory=dict)


def open_stream(path: str, mode: str = "rb") -> IO[bytes]:
    """Open a file, transparently (de)compressing by extension."""
    if path.endswith(".gz"):
        return gzip.open(path, mode)  # type: ignore[return-value]
    if path.endswith(".zst"):
        try:
            import zstandard
        except ImportError as e:  # pragma: no cover - env without zstandard
            raise RuntimeError(
                "reading .zst files requires the 'zstandard' package"
            ) from e
        if "r" in mode:
            return zstandard.open(path, "rb")
        return zstandard.open(path, "wb")
    return open(path, mode)


def read_documents(
    source: IO[bytes] | str,
    strict: bool = True,
    error_counter: list[int] | None = None,
) -> Iterator[Document]:
    """Yield documents from a newline-delimited record stream.

    In strict mode a corrupt line raises :class:`RecordParseError`. In
    lenient mode corrupt lines are skipped and counted in
    ``error_counter[0]`` if a counter list is supplied.
    """
    stream: IO[bytes]
    if isinstance(source, str):
        stream = open_stream(source, "rb")
        close = True
    else:
        stream = source
        close = False
    try:
        for lineno, raw in enumerate(stream, start=1):
            line = raw.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                if not isinstance(obj, dict):
                    raise ValueError("record is not an object")
                yield Document.from_dict(obj)
            except (ValueError, TypeError) as e:
                if strict:
                    raise RecordParseError(lineno, str(e)) from e
                if error_counter is not None:
                    error_counter[0] += 1
    finally:
        if close:
            stream.close()


def serialize_document(doc: Document) -> bytes:
    return json.dumps(doc.to_dict(), ensure_ascii=False, separators=(",", ":")).encode(
        "utf-8"
    )


def write_documents(docs: Iterable[Document], sink: IO[bytes] | str) -> CorpusStats:
    """Write documents one record per line; returns corpus counts."""
    stream: IO[bytes]
    if isinstance(sink, str):
        stream = open_stream(sink, "wb")
        close = True
    else:
        stream = sink
        close = False
    stats = CorpusStats()
    try:
        for doc in docs:
            payload = serialize_document(doc) + b"\n"
            stream.write(payload)
            stats.document_count += 1
            stats.word_count += len(doc.text.split())
            stats.byte_count += len(payload)
    finally:
        if close:
            stream.close()
    return stats


def documents_to_bytes(docs: Iterable[Document]) -> bytes:
    buf = io.BytesIO()
    write_documents(docs, buf)
    return buf.getvalue()
