"""Duplication-aware upsampling ("rehydration").

Filtering rates are computed per MinHash cluster size (pooling the
most-duplicated 0.1% of documents into one tail bucket). The cluster
size with the lowest removal rate gets weight 10, any size whose rate
reaches the global rate gets weight 1, and the remaining sizes are
interpolated linearly in removal rate between those endpoints.
"""

from __future__ import annotations

import logging
import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Iterator

from .corpus import Document
from .filters import passes_all

logger = logging.getLogger(__name__)

MAX_WEIGHT = 10
TAIL_FRACTION = 0.001


@dataclass
class SizeStats:
    total: int = 0
    removed: int = 0

    @property
    def rate(self) -> float:
        return self.removed / self.total if self.total else 0.0


@dataclass
class RateBySize:
    per_size: dict[int, SizeStats] = field(default_factory=dict)
    global_rate: float = 0.0
    tail_sizes: frozenset[int] = frozenset()
    tail_stats: SizeStats | None = None

    def stats_for(self, size: int) -> SizeStats | None:
        if size in self.tail_sizes:
            return self.tail_stats
        return self.per_size.get(size)


def filtering_rates_by_size(
    docs: Iterable[Document], tail_fraction: float = TAIL_FRACTION
) -> RateBySize:
    """Removal counts and rates per cluster size over annotated docs.

    Cluster sizes covering the most-duplicated ``tail_fraction`` of
    documents (largest sizes first) are pooled into one tail bucket.
    """
    raw: dict[int, SizeStats] = defaultdict(SizeStats)
    total = 0
    removed = 0
    for doc in docs:
        if doc.cluster_size is None:
            raise ValueError(f"document {doc.id} has no cluster_size")
        st = raw[doc.cluster_size]
        st.total += 1
        total += 1
        if not passes_all(doc):
            st.removed += 1
            removed += 1
    result = RateBySize(global_rate=removed / total if total else 0.0)
    tail_budget = total * tail_fraction
    tail = SizeStats()
    tail_sizes = set()
    acc = 0
    for size in sorted(raw, reverse=True):
        if acc + raw[size].total <= tail_budget and size > 1:
            tail_sizes.add(size)
            tail.total += raw[size].total
            tail.removed += raw[size].removed
            acc += raw[size].total
        else:
            result.per_size[size] = raw[size]
    if tail_sizes:
        result.tail_sizes = frozenset(tail_sizes)
        result.tail_stats = tail
    result.per_size = dict(sorted(result.per_size.items()))
    return result


@dataclass
class WeightTable:
    per_size: dict[int, int] = field(default_factory=dict)
    default: int = 1

    def weight(self, size: int) -> int:
        if size not in self.per_size:
            logger.warning("cluster size %d not in weight table; weight 1", size)
            return self.default
        return self.per_size[size]

    def to_dict(self) -> dict:
        return {str(k): v for k, v in sorted(self.per_size.items())}


def derive_weights(rates: RateBySize) -> WeightTable:
    """Weights from removal rates: 10 at the minimum-rate size, 1 at or
    above the global rate, linear in rate deficit in between."""
    buckets: list[tuple[list[int], float]] = [
        ([size], st.rate) for size, st in rates.per_size.items()
    ]
    if rates.tail_stats is not None:
        buckets.append((sorted(rates.tail_sizes), rates.tail_stats.rate))
    table = WeightTable()
    if not buckets:
        return table
    g = rates.global_rate
    min_rate = min(rate for _, rate in buckets)
    if min_rate >= g:
        for sizes, _ in buckets:
            for s in sizes:
                table.per_size[s] = 1
        return table
    span = g - min_rate
    for sizes, rate in buckets:
        if rate >= g:
            w = 1
        elif rate == min_rate:
            w = MAX_WEIGHT
        else:
            # round-half-up so x.5 interpolation points are stable
            w = math.floor(1 + (MAX_WEIGHT - 1) * (g - rate) / span + 0.5)
        for s in sizes:
            table.per_size[s] = int(w)
    return table


def rehydrate(
    docs: Iterable[Document], weights: WeightTable
) -> Iterator[Document]:
    """Emit each document weight(cluster_size) times, round-robin.

    Repeats are interleaved across the corpus (pass 1 emits every doc
    once, pass 2 emits those with weight >= 2, ...) so sequential
    consumers never see runs of identical documents.
    """
    doc_list = list(docs)
    weighted = []
    for doc in doc_list:
        if doc.cluster_size is None:
            raise ValueError(f"document {doc.id} has no cluster_size")
        doc.weight = weights.weight(doc.cluster_size)
        weighted.append(doc)
    max_w = max((d.weight for d in weighted), default=0)
    for pass_no in range(1, max_w + 1):
        for doc in weighted:
            if doc.weight >= pass_no:
                yield doc
