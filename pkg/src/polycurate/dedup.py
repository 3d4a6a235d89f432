"""MinHash near-deduplication with banded LSH candidate generation.

Signatures use 14 bands of 8 rows (112 hash functions) over word
5-gram shingles, the candidate-pair probability for Jaccard ``s`` being
``1 - (1 - s^8)^14``. Candidate pairs sharing any identical band are
merged into clusters by union-find; one representative per cluster is
kept and the cluster size is stamped on it for rehydration.
"""

from __future__ import annotations

import hashlib
from collections import defaultdict
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

MIN_SHINGLE_WORDS = 5


@dataclass(frozen=True)
class MinHashConfig:
    bands: int = 14
    rows_per_band: int = 8
    ngram_size: int = 5
    seed: int = 0x5EED_1DEA

    def __post_init__(self):
        if min(self.bands, self.rows_per_band, self.ngram_size) <= 0:
            raise ValueError("all MinHash parameters must be positive")

    @property
    def num_hashes(self) -> int:
        return self.bands * self.rows_per_band

    def candidate_probability(self, jaccard: float) -> float:
        return 1.0 - (1.0 - jaccard**self.rows_per_band) ** self.bands


@dataclass(frozen=True)
class Signature:
    values: tuple[int, ...]  # bands * rows_per_band 64-bit minima
    bands: int

    def band_keys(self) -> list[bytes]:
        rows = len(self.values) // self.bands
        out = []
        for b in range(self.bands):
            chunk = self.values[b * rows : (b + 1) * rows]
            out.append(
                bytes([b]) + b"".join(v.to_bytes(8, "little") for v in chunk)
            )
        return out


class TooShortDocument(ValueError):
    """Text segments into fewer words than one shingle; exempt from dedup."""


def _splitmix64(x: np.ndarray) -> np.ndarray:
    x = (x + np.uint64(0x9E3779B97F4A7C15)) & np.uint64(0xFFFFFFFFFFFFFFFF)
    x = (x ^ (x >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    x = (x ^ (x >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return x ^ (x >> np.uint64(31))


def _mix_keys(seed: int, n: int) -> np.ndarray:
    return _splitmix64(np.arange(1, n + 1, dtype=np.uint64) * np.uint64(seed | 1))


def shingles(words: Sequence[str], n: int) -> list[bytes]:
    """Consecutive word n-grams, lowercased and separator-joined."""
    lowered = [w.lower() for w in words]
    return [
        "\x1f".join(lowered[i : i + n]).encode("utf-8")
        for i in range(len(lowered) - n + 1)
    ]


def _base_hashes(shingle_bytes: list[bytes]) -> np.ndarray:
    return np.array(
        [
            int.from_bytes(
                hashlib.blake2b(s, digest_size=8).digest(), "little"
            )
            for s in shingle_bytes
        ],
        dtype=np.uint64,
    )


def signature(
    words_or_text: Sequence[str] | str,
    segmenter: Callable[[str], list[str]] | None = None,
    cfg: MinHashConfig = MinHashConfig(),
) -> Signature:
    """MinHash signature of a text (or pre-segmented word list)."""
    if isinstance(words_or_text, str):
        if segmenter is None:
            raise ValueError("segmenter required when passing raw text")
        words = segmenter(words_or_text)
    else:
        words = list(words_or_text)
    if len(words) < cfg.ngram_size:
        raise TooShortDocument(
            f"{len(words)} words < shingle size {cfg.ngram_size}"
        )
    base = _base_hashes(shingles(words, cfg.ngram_size))
    keys = _mix_keys(cfg.seed, cfg.num_hashes)
    with np.errstate(over="ignore"):
        # (num_hashes, num_shingles) permutation-style mixing, min per row.
        mixed = _splitmix64(base[None, :] ^ keys[:, None])
    minima = mixed.min(axis=1)
    return Signature(tuple(int(v) for v in minima), cfg.bands)


@dataclass
class DuplicateCluster:
    representative: str
    size: int
    members: list[str] | None = None


class UnionFind:
    """Disjoint sets over string ids; roots are the smallest member id."""

    def __init__(self):
        self.parent: dict[str, str] = {}

    def find(self, x: str) -> str:
        if x not in self.parent:
            self.parent[x] = x
            return x
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, x: str, y: str):
        px, py = self.find(x), self.find(y)
        if px == py:
            return
        root = min(px, py)
        self.parent[px] = self.parent[py] = root


def cluster(
    signed_docs: Iterable[tuple[str, Signature]],
) -> list[DuplicateCluster]:
    """Group documents sharing any identical band into clusters."""
    uf = UnionFind()
    buckets: dict[bytes, str] = {}
    seen: set[str] = set()
    ids: list[str] = []
    for doc_id, sig in signed_docs:
        if doc_id in seen:
            raise ValueError(f"duplicate document id: {doc_id}")
        seen.add(doc_id)
        ids.append(doc_id)
        uf.find(doc_id)
        for key in sig.band_keys():
            if key in buckets:
                uf.union(buckets[key], doc_id)
            else:
                buckets[key] = doc_id
    groups: dict[str, list[str]] = defaultdict(list)
    for doc_id in ids:
        groups[uf.find(doc_id)].append(doc_id)
    clusters = []
    for members in groups.values():
        members.sort()
        clusters.append(
            DuplicateCluster(
                representative=members[0], size=len(members), members=members
            )
        )
    clusters.sort(key=lambda c: c.representative)
    return clusters


def deduplicate(docs: Iterable, clusters: list[DuplicateCluster]) -> list:
    """Keep each cluster's representative, stamping its cluster size.

    Documents absent from any cluster (too short for shingling) pass
    through with cluster_size 1.
    """
    size_by_rep = {c.representative: c.size for c in clusters}
    all_members: set[str] = set()
    for c in clusters:
        all_members.update(c.members or [c.representative])
    out = []
    for doc in docs:
        if doc.id in size_by_rep:
            doc.cluster_size = size_by_rep[doc.id]
            out.append(doc)
        elif doc.id not in all_members:
            doc.cluster_size = 1
            out.append(doc)
    out.sort(key=lambda d: d.id)
    return out


def cluster_size_histogram(clusters: list[DuplicateCluster]) -> dict[int, int]:
    hist: dict[int, int] = defaultdict(int)
    for c in clusters:
        hist[c.size] += 1
    return dict(sorted(hist.items()))
