import pytest

from polycurate.rehydration import (
    RateBySize,
    SizeStats,
    WeightTable,
    derive_weights,
    filtering_rates_by_size,
    rehydrate,
)

from .conftest import make_doc


def annotated_doc(i, size, passed):
    return make_doc(
        i, "text", cluster_size=size, filter_verdicts={"overall": passed}
    )


class TestRatesBySize:
    def test_hand_built_fixture(self):
        docs = [annotated_doc(i, 1, i >= 6) for i in range(10)]  # 60% removed
        docs += [annotated_doc(10 + i, 4, i >= 2) for i in range(10)]  # 20% removed
        rates = filtering_rates_by_size(docs)
        assert rates.per_size[1].rate == pytest.approx(0.6)
        assert rates.per_size[4].rate == pytest.approx(0.2)
        assert rates.global_rate == pytest.approx(0.4)

    def test_all_pass(self):
        docs = [annotated_doc(i, 1 + i % 3, True) for i in range(9)]
        rates = filtering_rates_by_size(docs)
        assert rates.global_rate == 0.0
        assert all(st.rate == 0.0 for st in rates.per_size.values())

    def test_single_size_global_equals_size_rate(self):
        docs = [annotated_doc(i, 2, i % 4 == 0) for i in range(8)]
        rates = filtering_rates_by_size(docs)
        assert rates.global_rate == rates.per_size[2].rate

    def test_missing_cluster_size_rejected(self):
        doc = make_doc(0, "x", filter_verdicts={"f": True})
        with pytest.raises(ValueError):
            filtering_rates_by_size([doc])

    def test_tail_grouping(self):
        # 10k size-1 docs plus a handful of huge-cluster docs: the
        # largest sizes pool into one tail bucket covering ~0.1% of docs.
        docs = [annotated_doc(i, 1, True) for i in range(10_000)]
        docs += [annotated_doc(20_000 + i, 500 + i, False) for i in range(10)]
        rates = filtering_rates_by_size(docs)
        assert rates.tail_stats is not None
        assert rates.tail_stats.total == 10
        assert rates.tail_stats.rate == 1.0
        assert 509 in rates.tail_sizes


class TestDeriveWeights:
    def _rates(self, per_size, global_rate):
        r = RateBySize(global_rate=global_rate)
        for size, (total, removed) in per_size.items():
            r.per_size[size] = SizeStats(total, removed)
        return r

    def test_min_rate_gets_ten(self):
        rates = self._rates({1: (10, 6), 4: (10, 1)}, 0.35)
        w = derive_weights(rates)
        assert w.per_size[4] == 10

    def test_rate_at_global_gets_one(self):
        rates = self._rates({1: (10, 4), 2: (10, 1)}, 0.4)
        w = derive_weights(rates)
        assert w.per_size[1] == 1

    def test_interpolated_weight_six(self):
        # rates: s1 0.1 (min), s2 0.25, global 0.4
        rates = self._rates({1: (100, 10), 2: (100, 25)}, 0.4)
        w = derive_weights(rates)
        assert w.per_size[1] == 10
        # independent recomputation: 1 + 9 * (0.4 - 0.25) / (0.4 - 0.1)
        # = 5.5, rounded half-up to 6
        assert w.per_size[2] == 6

    def test_all_rates_at_or_above_global(self):
        rates = self._rates({1: (10, 5), 2: (10, 6)}, 0.5)
        w = derive_weights(rates)
        assert set(w.per_size.values()) == {1}

    def test_monotone_in_rate(self):
        rates = self._rates(
            {1: (100, 5), 2: (100, 15), 3: (100, 25), 4: (100, 35), 5: (100, 45)},
            0.4,
        )
        w = derive_weights(rates)
        ordered = [w.per_size[s] for s in (1, 2, 3, 4, 5)]
        assert ordered == sorted(ordered, reverse=True)

    def test_rate_not_size_drives_weights(self):
        # U-shaped and monotone rate layouts with identical rate values
        # produce identical weight sets regardless of size ordering.
        u = self._rates({1: (100, 40), 2: (100, 10), 3: (100, 40)}, 0.3)
        m = self._rates({1: (100, 10), 2: (100, 40), 3: (100, 40)}, 0.3)
        wu = derive_weights(u)
        wm = derive_weights(m)
        assert sorted(wu.per_size.values()) == sorted(wm.per_size.values())

    def test_tail_bucket_weighted_as_one_unit(self):
        r = RateBySize(global_rate=0.4)
        r.per_size[1] = SizeStats(100, 10)
        r.tail_sizes = frozenset({50, 60})
        r.tail_stats = SizeStats(10, 5)
        w = derive_weights(r)
        assert w.per_size[50] == w.per_size[60]


class TestRehydrate:
    def test_weight_10_repeats_10_times(self):
        doc = annotated_doc(0, 3, True)
        table = WeightTable(per_size={3: 10})
        out = list(rehydrate([doc], table))
        assert len(out) == 10
        assert all(d.id == doc.id for d in out)

    def test_all_weight_one_identity(self):
        docs = [annotated_doc(i, 1, True) for i in range(5)]
        table = WeightTable(per_size={1: 1})
        assert [d.id for d in rehydrate(docs, table)] == [d.id for d in docs]

    def test_output_count_sum_of_weights(self):
        docs = [annotated_doc(i, 1, True) for i in range(5)]
        docs += [annotated_doc(10 + i, 4, True) for i in range(2)]
        table = WeightTable(per_size={1: 1, 4: 3})
        out = list(rehydrate(docs, table))
        assert len(out) == 5 * 1 + 2 * 3 == 11

    def test_unknown_size_defaults_to_one(self):
        doc = annotated_doc(0, 7, True)
        out = list(rehydrate([doc], WeightTable(per_size={1: 2})))
        assert len(out) == 1

    def test_round_robin_interleave(self):
        docs = [annotated_doc(i, 4, True) for i in range(3)]
        table = WeightTable(per_size={4: 2})
        out = [d.id for d in rehydrate(docs, table)]
        assert out == [
            "doc000000", "doc000001", "doc000002",
            "doc000000", "doc000001", "doc000002",
        ]

    def test_weight_stamped(self):
        doc = annotated_doc(0, 2, True)
        out = list(rehydrate([doc], WeightTable(per_size={2: 4})))
        assert out[0].weight == 4
