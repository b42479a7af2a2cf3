import numpy as np
import pytest

from seqaffect import metrics
from seqaffect.annotation import (
    AnnotatorTrace,
    ewe_fuse,
    normalize_trace,
    per_rater_quality,
)
from oracles import ewe_oracle

rng = np.random.default_rng(11)


def make_trace(values, rater="r0", dim="trustworthiness", rec="vid1", vrange=(-1.0, 1.0)):
    return AnnotatorTrace(
        rater_id=rater,
        dimension=dim,
        recording_id=rec,
        values=np.asarray(values, dtype=float),
        value_range=vrange,
    )


def random_traces(k=4, t=40, rec="vid1"):
    base = np.clip(rng.normal(scale=0.3, size=t), -0.9, 0.9)
    traces = []
    for i in range(k):
        noise = np.clip(base + rng.normal(scale=0.1, size=t), -1, 1)
        traces.append(make_trace(noise, rater=f"r{i}", rec=rec))
    return traces


class TestTrace:
    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            make_trace([0.0, 2.0])

    def test_rejects_short(self):
        with pytest.raises(ValueError):
            make_trace([0.5])

    def test_rejects_unknown_dimension(self):
        with pytest.raises(ValueError):
            make_trace([0.1, 0.2], dim="anger")


class TestEweFuse:
    def test_identical_traces_fuse_to_themselves(self):
        values = np.clip(rng.normal(scale=0.4, size=30), -1, 1)
        traces = [make_trace(values, rater=f"r{i}") for i in range(5)]
        gold = ewe_fuse(traces)
        np.testing.assert_allclose(gold.values, values, atol=1e-12)
        assert gold.raters_used == 5
        for w in gold.weights.values():
            assert w == pytest.approx(0.2, abs=1e-12)
        assert not gold.fallback_uniform

    def test_anticorrelated_rater_clamped(self):
        a = make_trace([0, 1, 0, 1, 0], rater="a")
        b = make_trace([0, 1, 0, 1, 0], rater="b")
        c = make_trace([1, 0, 1, 0, 1], rater="c")
        gold = ewe_fuse([a, b, c])
        # c's correlation with the mean is negative, so its weight clamps to 0
        assert gold.weights["c"] == 0.0
        assert gold.weights["a"] == pytest.approx(0.5, abs=1e-12)
        assert gold.weights["b"] == pytest.approx(0.5, abs=1e-12)
        np.testing.assert_allclose(gold.values, a.values, atol=1e-12)

    def test_equal_weights_reduce_to_mean(self):
        # a constant offset gives both raters correlation 1 with the mean,
        # so the weights are equal and the fusion is the pointwise mean
        a = make_trace([0.0, 0.4, -0.2, 0.6], rater="a")
        b = make_trace(a.values + 0.2, rater="b")
        gold = ewe_fuse([a, b])
        assert gold.weights["a"] == pytest.approx(0.5, abs=1e-12)
        expected = (a.values + b.values) / 2
        np.testing.assert_allclose(gold.values, expected, atol=1e-12)

    def test_matches_oracle(self):
        for _ in range(20):
            traces = random_traces(k=int(rng.integers(2, 6)))
            gold = ewe_fuse(traces)
            weights, fused = ewe_oracle([t.values.tolist() for t in traces])
            np.testing.assert_allclose(gold.values, fused, atol=1e-10)
            for t, w in zip(traces, weights):
                assert gold.weights[t.rater_id] == pytest.approx(w, abs=1e-10)

    def test_permutation_invariance(self):
        traces = random_traces(k=5)
        base = ewe_fuse(traces)
        for _ in range(5):
            perm = rng.permutation(len(traces))
            shuffled = [traces[i] for i in perm]
            gold = ewe_fuse(shuffled)
            np.testing.assert_array_equal(gold.values, base.values)
            assert gold.weights == base.weights

    def test_affine_equivariance(self):
        traces = random_traces(k=4)
        m, c = 0.35, 0.1
        scaled = [
            make_trace(m * t.values + c, rater=t.rater_id) for t in traces
        ]
        base = ewe_fuse(traces)
        moved = ewe_fuse(scaled)
        np.testing.assert_allclose(moved.values, m * base.values + c, atol=1e-10)

    def test_convexity_envelope_with_duplicate(self):
        traces = random_traces(k=3)
        dup = make_trace(traces[0].values, rater="dup")
        gold = ewe_fuse(traces + [dup])
        stack = np.stack([t.values for t in traces])
        assert np.all(gold.values >= stack.min(axis=0) - 1e-12)
        assert np.all(gold.values <= stack.max(axis=0) + 1e-12)

    def test_all_clamped_falls_back_to_mean(self):
        # two perfectly anti-correlated raters: both correlate 0 with the
        # (constant) mean, so the fusion falls back to the uniform mean
        a = make_trace([-0.5, 0.5, -0.5, 0.5], rater="a")
        b = make_trace([0.5, -0.5, 0.5, -0.5], rater="b")
        gold = ewe_fuse([a, b])
        assert gold.fallback_uniform
        np.testing.assert_allclose(gold.values, np.zeros(4), atol=1e-12)

    def test_errors(self):
        a = make_trace([0.1, 0.2], rater="a")
        with pytest.raises(ValueError):
            ewe_fuse([a])
        b = make_trace([0.1, 0.2, 0.3], rater="b")
        with pytest.raises(ValueError):
            ewe_fuse([a, b])
        with pytest.raises(ValueError):
            ewe_fuse([a, make_trace([0.1, 0.2], rater="a")])

    def test_leave_one_out_base(self):
        traces = random_traces(k=4)
        gold = ewe_fuse(traces, include_self=False)
        assert abs(sum(gold.weights.values()) - 1.0) < 1e-12


class TestPerRaterQuality:
    def test_identical(self):
        values = np.clip(rng.normal(scale=0.4, size=25), -1, 1)
        traces = [make_trace(values, rater=f"r{i}") for i in range(3)]
        scores = per_rater_quality(traces)
        for v in scores.values():
            assert v == pytest.approx(1.0, abs=1e-9)

    def test_inverted_rater_flagged(self):
        base = np.clip(np.sin(np.linspace(0, 6, 50)) * 0.8, -1, 1)
        traces = [
            make_trace(base, rater="good1"),
            make_trace(np.clip(base + 0.05, -1, 1), rater="good2"),
            make_trace(np.clip(base - 0.05, -1, 1), rater="good3"),
            make_trace(-base, rater="inverted"),
        ]
        scores = per_rater_quality(traces)
        assert scores["inverted"] < 0
        assert scores["good1"] > 0.3
        assert scores["good2"] > 0.3

    def test_permutation_stable(self):
        traces = random_traces(k=4)
        base = per_rater_quality(traces)
        shuffled = per_rater_quality(traces[::-1])
        assert base == shuffled


class TestNormalize:
    def test_raw_endpoints(self):
        raw = make_trace([1000.0, -1000.0, 0.0], vrange=(-1000.0, 1000.0))
        unit = normalize_trace(raw, (-1.0, 1.0))
        np.testing.assert_allclose(unit.values, [1.0, -1.0, 0.0], atol=1e-15)
        assert unit.value_range == (-1.0, 1.0)

    def test_round_trip(self):
        raw_values = rng.uniform(-1000, 1000, size=50)
        raw = make_trace(raw_values, vrange=(-1000.0, 1000.0))
        back = normalize_trace(normalize_trace(raw, (-1.0, 1.0)), (-1000.0, 1000.0))
        np.testing.assert_allclose(back.values, raw_values, atol=1e-12)

    def test_pcc_preserved(self):
        raw = make_trace(rng.uniform(-900, 900, size=30), vrange=(-1000.0, 1000.0))
        unit = normalize_trace(raw, (-1.0, 1.0))
        assert metrics.pcc(raw.values, unit.values) == pytest.approx(1.0, abs=1e-12)

    def test_degenerate_target(self):
        raw = make_trace([0.1, 0.2])
        with pytest.raises(ValueError):
            normalize_trace(raw, (1.0, 1.0))
