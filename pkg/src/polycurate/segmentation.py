"""Word segmentation registry and family-tree proxy assignment.

Three bundled segmenter strategies cover the scripts exercised in tests:
whitespace+punctuation splitting (Latin/Cyrillic style), per-character
splitting (Han style), and longest-match dictionary segmentation for
unspaced scripts. Real segmentation libraries can be registered behind
the same interface.

Languages without a native segmenter get a proxy through their language
family taxonomy: native segmenters are propagated up the tree (per
script, highest-resource child wins, never through the root) and then
down to uncovered leaves. Remaining Latin/Cyrillic leaves fall back to
the multilingual default; other scripts fall back to the
highest-resource native language of the same script.
"""

from __future__ import annotations

import json
import re
import unicodedata
from dataclasses import dataclass, field
from typing import Callable, Iterable

from .corpus import LanguageKey

MULTILINGUAL_SEGMENTER = "multilingual_default"

_WORD_RE = re.compile(r"\w+([''\-]\w+)*", re.UNICODE)


class UnknownSegmenter(KeyError):
    pass


def whitespace_segment(text: str) -> list[str]:
    """Split on whitespace, stripping punctuation from token edges."""
    return [m.group(0) for m in _WORD_RE.finditer(text)]


def character_segment(text: str) -> list[str]:
    return [ch for ch in text if not ch.isspace() and _WORD_RE.match(ch)]


class DictionarySegmenter:
    """Greedy longest-match segmentation over a fixed vocabulary.

    Characters not starting any vocabulary entry become single-character
    words (so output never invents characters and never drops word
    content silently).
    """

    def __init__(self, vocabulary: Iterable[str]):
        self.vocab = set(vocabulary)
        self.max_len = max((len(w) for w in self.vocab), default=1)

    def __call__(self, text: str) -> list[str]:
        words = []
        i = 0
        n = len(text)
        while i < n:
            if text[i].isspace():
                i += 1
                continue
            for length in range(min(self.max_len, n - i), 0, -1):
                cand = text[i : i + length]
                if cand in self.vocab or length == 1:
                    words.append(cand)
                    i += length
                    break
        return words


class SegmenterRegistry:
    """Named segmentation strategies shared across the pipeline."""

    def __init__(self):
        self._segmenters: dict[str, Callable[[str], list[str]]] = {}
        self.register(MULTILINGUAL_SEGMENTER, whitespace_segment)

    def register(self, segmenter_id: str, fn: Callable[[str], list[str]]):
        self._segmenters[segmenter_id] = fn

    def get(self, segmenter_id: str) -> Callable[[str], list[str]]:
        try:
            return self._segmenters[segmenter_id]
        except KeyError:
            raise UnknownSegmenter(segmenter_id) from None

    def __contains__(self, segmenter_id: str) -> bool:
        return segmenter_id in self._segmenters


DEFAULT_REGISTRY = SegmenterRegistry()


@dataclass(frozen=True)
class SegmenterAssignment:
    language: LanguageKey
    segmenter_id: str
    provenance: str  # native | family-propagated | script-default-multilingual | script-highest-resource


def segment(
    text: str,
    assignment: SegmenterAssignment,
    registry: SegmenterRegistry = DEFAULT_REGISTRY,
) -> list[str]:
    return registry.get(assignment.segmenter_id)(text)


@dataclass
class FamilyNode:
    """One node of a language-family taxonomy tree."""

    name: str
    languages: list[LanguageKey] = field(default_factory=list)
    resource_rank: float = 0.0
    children: list["FamilyNode"] = field(default_factory=list)

    @classmethod
    def from_dict(cls, d: dict) -> "FamilyNode":
        return cls(
            name=d["name"],
            languages=[LanguageKey.parse(s) for s in d.get("languages", [])],
            resource_rank=float(d.get("resource_rank", 0.0)),
            children=[cls.from_dict(c) for c in d.get("children", [])],
        )

    @classmethod
    def load(cls, path: str) -> "FamilyNode":
        with open(path, encoding="utf-8") as f:
            return cls.from_dict(json.load(f))

    def leaves(self) -> list["FamilyNode"]:
        if not self.children:
            return [self]
        out = []
        for c in self.children:
            out.extend(c.leaves())
        return out


def propagate_assignments(
    tree: FamilyNode,
    natives: Iterable[SegmenterAssignment],
    resource_ranks: dict[LanguageKey, float] | None = None,
) -> dict[LanguageKey, SegmenterAssignment]:
    """Assign a segmenter to every language in the family tree.

    Upward pass: each non-root node inherits, per script, the segmenter
    of the contributing language with the most data (ties broken by
    smallest language code). Downward pass: uncovered leaves take the
    nearest ancestor's segmenter for their script. Leaves still
    uncovered get the multilingual default (Latin/Cyrillic scripts) or
    the highest-resource native segmenter of their script.
    """
    natives = list(natives)
    ranks = resource_ranks or {}
    native_by_lang = {a.language: a for a in natives}

    known_langs = {lk for leaf in tree.leaves() for lk in leaf.languages}
    for a in natives:
        if a.language not in known_langs:
            raise ValueError(f"native assignment references unknown leaf: {a.language}")

    def rank(lang: LanguageKey) -> float:
        return ranks.get(lang, 0.0)

    # Upward pass. Carries (segmenter_id, source language) per script so
    # ties and rank comparisons happen at the contributing-leaf level.
    def up(node: FamilyNode) -> dict[str, tuple[str, LanguageKey]]:
        carried: dict[str, tuple[str, LanguageKey]] = {}
        candidates: dict[str, list[tuple[str, LanguageKey]]] = {}
        for lk in node.languages:
            if lk in native_by_lang:
                candidates.setdefault(lk.script, []).append(
                    (native_by_lang[lk].segmenter_id, lk)
                )
        for child in node.children:
            for script, entry in up(child).items():
                candidates.setdefault(script, []).append(entry)
        for script, entries in candidates.items():
            carried[script] = max(entries, key=lambda e: (rank(e[1]), _neg_code(e[1])))
        node_carried[id(node)] = carried
        return carried

    node_carried: dict[int, dict[str, tuple[str, LanguageKey]]] = {}
    for child in tree.children:
        up(child)
    node_carried[id(tree)] = {}  # no propagation to the root

    result: dict[LanguageKey, SegmenterAssignment] = {}

    def down(node: FamilyNode, inherited: dict[str, tuple[str, LanguageKey]]):
        merged = dict(inherited)
        # Nearest ancestor wins, so the node's own carried segmenters
        # override anything inherited from above.
        merged.update(node_carried.get(id(node), {}))
        for lk in node.languages:
            if lk in native_by_lang:
                result[lk] = native_by_lang[lk]
            elif lk.script in merged:
                result[lk] = SegmenterAssignment(
                    lk, merged[lk.script][0], "family-propagated"
                )
        for child in node.children:
            down(child, merged)

    down(tree, {})

    # Fallbacks for leaves no family segmenter reached.
    best_native_by_script: dict[str, tuple[float, str, str]] = {}
    for a in natives:
        script = a.language.script
        key = (rank(a.language), a.language.lang)
        cur = best_native_by_script.get(script)
        if cur is None or (key[0], _neg_str(key[1])) > (cur[0], _neg_str(cur[1])):
            best_native_by_script[script] = (key[0], key[1], a.segmenter_id)
    for lk in sorted(known_langs):
        if lk in result:
            continue
        if lk.script in ("Latn", "Cyrl"):
            result[lk] = SegmenterAssignment(
                lk, MULTILINGUAL_SEGMENTER, "script-default-multilingual"
            )
        elif lk.script in best_native_by_script:
            result[lk] = SegmenterAssignment(
                lk, best_native_by_script[lk.script][2], "script-highest-resource"
            )
        else:
            result[lk] = SegmenterAssignment(
                lk, MULTILINGUAL_SEGMENTER, "script-default-multilingual"
            )
    return result


class _neg_code:
    """Order helper: smaller language code compares greater (for max())."""

    def __init__(self, lang: LanguageKey):
        self.code = lang.lang

    def __lt__(self, other: "_neg_code") -> bool:
        return self.code > other.code

    def __eq__(self, other: object) -> bool:
        return isinstance(other, _neg_code) and self.code == other.code


class _neg_str(_neg_code):
    def __init__(self, s: str):
        self.code = s


# Compact per-script detection for reference-corpus cleaning and the
# character segmenter; covers the scripts exercised by the pipeline.
_SCRIPT_RANGES = [
    ("Latn", (0x0041, 0x024F)),
    ("Grek", (0x0370, 0x03FF)),
    ("Cyrl", (0x0400, 0x04FF)),
    ("Armn", (0x0530, 0x058F)),
    ("Hebr", (0x0590, 0x05FF)),
    ("Arab", (0x0600, 0x06FF)),
    ("Arab", (0x0750, 0x077F)),
    ("Deva", (0x0900, 0x097F)),
    ("Beng", (0x0980, 0x09FF)),
    ("Taml", (0x0B80, 0x0BFF)),
    ("Telu", (0x0C00, 0x0C7F)),
    ("Thai", (0x0E00, 0x0E7F)),
    ("Geor", (0x10A0, 0x10FF)),
    ("Ethi", (0x1200, 0x137F)),
    ("Hang", (0xAC00, 0xD7AF)),
    ("Hani", (0x4E00, 0x9FFF)),
    ("Hani", (0x3400, 0x4DBF)),
    ("Hira", (0x3040, 0x309F)),
    ("Kana", (0x30A0, 0x30FF)),
]


def char_script(ch: str) -> str | None:
    cp = ord(ch)
    for script, (lo, hi) in _SCRIPT_RANGES:
        if lo <= cp <= hi:
            return script
    return None


def dominant_script(text: str) -> str | None:
    """Most frequent script among letter characters; None if no letters."""
    counts: dict[str, int] = {}
    for ch in text:
        if unicodedata.category(ch).startswith("L"):
            s = char_script(ch)
            if s:
                counts[s] = counts.get(s, 0) + 1
    if not counts:
        return None
    return max(counts.items(), key=lambda kv: (kv[1], kv[0]))[0]
