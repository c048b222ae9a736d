import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gnnaudit.analysis import (
    Ecdf,
    aggregate,
    js_divergence,
    kl_divergence,
    logit_transform,
    neighbor_js_profile,
    performance_gap,
    regime_kl_profile,
    sigmoid,
)
from gnnaudit.models import ModelConfig, Regime, TrainConfig, infer, train
from gnnaudit.sampling import random_node_split

from conftest import make_graph

probability_vectors = st.integers(2, 6).flatmap(
    lambda k: st.lists(st.floats(1e-6, 1.0), min_size=k, max_size=k)
).map(lambda raw: np.array(raw) / np.sum(raw))


def make_table(probs, labels=None):
    from gnnaudit.models import PosteriorTable

    probs = np.asarray(probs, dtype=np.float64)
    n = probs.shape[0]
    labels = np.zeros(n, dtype=np.int64) if labels is None else np.asarray(labels)
    losses = -np.log(np.clip(probs[np.arange(n), labels], 1e-300, None))
    return PosteriorTable(
        node_ids=np.arange(n, dtype=np.int64), probs=probs, losses=losses, labels=labels
    )


class TestKl:
    def test_identical_inputs_zero(self):
        assert kl_divergence([0.3, 0.7], [0.3, 0.7]) == 0.0

    def test_degenerate_vs_uniform_is_ln2(self):
        assert kl_divergence([1.0, 0.0], [0.5, 0.5]) == pytest.approx(math.log(2), abs=1e-6)

    def test_asymmetry_closed_form(self):
        p, q = [0.9, 0.1], [0.5, 0.5]
        forward_kl = 0.9 * math.log(0.9 / 0.5) + 0.1 * math.log(0.1 / 0.5)
        reverse_kl = 0.5 * math.log(0.5 / 0.9) + 0.5 * math.log(0.5 / 0.1)
        assert kl_divergence(p, q) == pytest.approx(forward_kl, abs=1e-12)
        assert kl_divergence(q, p) == pytest.approx(reverse_kl, abs=1e-12)
        assert kl_divergence(p, q) != kl_divergence(q, p)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            kl_divergence([0.5, 0.5], [0.3, 0.3, 0.4])

    @settings(max_examples=100, deadline=None)
    @given(p=probability_vectors, q=probability_vectors)
    def test_nonnegative_and_zero_iff_equal(self, p, q):
        if p.size != q.size:
            p, q = p[: min(p.size, q.size)], q[: min(p.size, q.size)]
            p, q = p / p.sum(), q / q.sum()
        d = kl_divergence(p, q)
        assert d >= 0.0
        if np.allclose(p, q, atol=1e-15):
            assert d == pytest.approx(0.0, abs=1e-9)
        assert kl_divergence(p, p) == pytest.approx(0.0, abs=1e-12)


class TestJs:
    def test_identical_zero(self):
        assert js_divergence([0.2, 0.8], [0.2, 0.8]) == 0.0

    def test_disjoint_support_is_ln2(self):
        assert js_divergence([1.0, 0.0], [0.0, 1.0]) == pytest.approx(math.log(2), abs=1e-6)

    @settings(max_examples=100, deadline=None)
    @given(p=probability_vectors, q=probability_vectors)
    def test_symmetric_and_bounded(self, p, q):
        if p.size != q.size:
            p, q = p[: min(p.size, q.size)], q[: min(p.size, q.size)]
            p, q = p / p.sum(), q / q.sum()
        d = js_divergence(p, q)
        assert d == pytest.approx(js_divergence(q, p), abs=1e-12)
        assert -1e-12 <= d <= math.log(2) + 1e-12


class TestLogit:
    def test_half_maps_to_zero(self):
        assert logit_transform(0.5) == 0.0

    def test_one_clamps(self):
        expected = math.log((1 - 1e-6) / 1e-6)
        assert logit_transform(1.0) == pytest.approx(expected, abs=1e-9)
        assert expected == pytest.approx(13.8155, abs=1e-3)

    def test_sigmoid_inverse(self):
        for p in np.linspace(1e-6, 1 - 1e-6, 23):
            assert sigmoid(logit_transform(p)) == pytest.approx(p, abs=1e-9)

    def test_strictly_increasing_and_odd(self):
        ps = np.linspace(1e-6, 1 - 1e-6, 101)
        zs = [logit_transform(p) for p in ps]
        assert all(a < b for a, b in zip(zs, zs[1:]))
        for p in ps:
            assert logit_transform(p) == pytest.approx(-logit_transform(1 - p), abs=1e-9)


class TestPerformanceGap:
    def test_worked_value(self):
        assert performance_gap(0.9889, 0.7716) == pytest.approx(21.97, abs=0.01)

    def test_equal_accs_zero(self):
        assert performance_gap(0.83, 0.83) == 0.0

    def test_total_collapse(self):
        assert performance_gap(1.0, 0.0) == 100.0

    def test_negative_when_test_beats_train(self):
        assert performance_gap(0.8, 0.9) < 0.0

    def test_zero_train_acc_rejected(self):
        with pytest.raises(ValueError):
            performance_gap(0.0, 0.5)

    @settings(max_examples=80, deadline=None)
    @given(
        train_num=st.integers(1, 100), train_den=st.integers(100, 200),
        test_num=st.integers(0, 100), test_den=st.integers(100, 200),
    )
    def test_exact_against_rational_arithmetic(self, train_num, train_den, test_num, test_den):
        train_acc = train_num / train_den
        test_acc = test_num / test_den
        exact = (Fraction(train_num, train_den) - Fraction(test_num, test_den)) \
            / Fraction(train_num, train_den) * 100
        assert performance_gap(train_acc, test_acc) == pytest.approx(
            float(exact), rel=1e-12, abs=1e-12
        )


class TestNeighborJs:
    def test_identical_posteriors_all_zero(self):
        table = make_table(np.tile([0.25, 0.75], (4, 1)))
        records, ecdf = neighbor_js_profile(table, np.array([[0, 1], [1, 2], [2, 3]]))
        assert all(r.mean_js == pytest.approx(0.0, abs=1e-12) for r in records)
        assert ecdf.values[-1] == pytest.approx(0.0, abs=1e-12)

    def test_opposed_posteriors_hit_ln2(self):
        table = make_table(np.array([[1.0, 0.0], [0.0, 1.0]]))
        records, _ = neighbor_js_profile(table, np.array([[0, 1]]))
        assert len(records) == 2
        for r in records:
            assert r.mean_js == pytest.approx(math.log(2), abs=1e-5)

    def test_isolated_nodes_skipped(self):
        table = make_table(np.tile([0.5, 0.5], (3, 1)))
        records, _ = neighbor_js_profile(table, np.array([[0, 1]]))
        assert [r.node_id for r in records] == [0, 1]


class TestEcdf:
    def test_reaches_one_and_monotone(self):
        ecdf = Ecdf.from_samples([0.3, 0.1, 0.9, 0.3])
        assert ecdf.fractions[-1] == 1.0
        assert np.all(np.diff(ecdf.fractions) >= 0)
        assert np.all(np.diff(ecdf.values) >= 0)

    def test_right_continuous_at_sample_points(self):
        ecdf = Ecdf.from_samples([1.0, 2.0, 2.0, 5.0])
        assert ecdf.at(2.0) == pytest.approx(0.75)
        assert ecdf.at(1.9999) == pytest.approx(0.25)
        assert ecdf.at(5.0) == 1.0


class TestRegimeKl:
    def _trained(self, miniset):
        split = random_node_split(miniset, 0.3, seed=1)
        params = train(
            miniset, split,
            ModelConfig(arch="gcn", hidden_dim=16, dropout=0.0),
            TrainConfig(epochs=100, init_seed=0),
        )
        return split, params

    def test_same_regime_all_zero(self, miniset):
        split, params = self._trained(miniset)
        a = infer(params, miniset, split, Regime.ORIG)
        b = infer(params, miniset, split, Regime.ORIG)
        records, hist_m, hist_n = regime_kl_profile(a, b, split.train_mask())
        assert all(r.kl == 0.0 for r in records)

    def test_all_vs_none_positive_for_some_member(self, miniset):
        split, params = self._trained(miniset)
        a = infer(params, miniset, split, Regime.ALL_EDGES)
        b = infer(params, miniset, split, Regime.NO_GRAPH)
        records, hist_m, hist_n = regime_kl_profile(a, b, split.train_mask())
        kl = {r.node_id: r.kl for r in records}
        members = set(map(int, split.train_nodes))
        assert max(kl[v] for v in members) > 0.0
        assert hist_m.counts.sum() == split.train_nodes.size
        assert hist_n.counts.sum() == split.test_nodes.size
        np.testing.assert_array_equal(hist_m.edges, hist_n.edges)

    def test_isolated_node_zero(self, miniset):
        split, params = self._trained(miniset)
        a = infer(params, miniset, split, Regime.ALL_EDGES)
        b = infer(params, miniset, split, Regime.NO_GRAPH)
        records, _, _ = regime_kl_profile(a, b, split.train_mask())
        kl = {r.node_id: r.kl for r in records}
        for v in (117, 118, 119):
            assert kl[v] == pytest.approx(0.0, abs=1e-12)


class TestAggregate:
    def test_single_record_std_zero(self):
        out = aggregate([("a", 3.0)], key_fn=lambda r: r[0], value_fn=lambda r: r[1])
        assert out["a"] == (3.0, 0.0, 1)

    def test_one_two_three(self):
        rows = [("g", 1.0), ("g", 2.0), ("g", 3.0)]
        mean, std, n = aggregate(rows, lambda r: r[0], lambda r: r[1])["g"]
        assert mean == 2.0 and std == 1.0 and n == 3

    def test_groups_partition_input(self):
        rows = [(k, float(i)) for i, k in enumerate("aabcbc")]
        out = aggregate(rows, lambda r: r[0], lambda r: r[1])
        assert sum(v[2] for v in out.values()) == len(rows)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            aggregate([], lambda r: r, lambda r: r)
