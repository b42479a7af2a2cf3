import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from seqaffect import metrics
from oracles import ccc_oracle, pcc_oracle, rmse_oracle

rng = np.random.default_rng(7)


def finite_seq(min_size=2, max_size=60):
    return st.lists(
        st.floats(min_value=-100, max_value=100, allow_nan=False),
        min_size=min_size,
        max_size=max_size,
    )


class TestCCC:
    def test_identity(self):
        # the epsilon denominator guard bounds ccc(a, a) below 1 by eps/(2 var)
        a = [0.1, 0.5, -0.2, 0.9]
        assert metrics.ccc(a, a) == pytest.approx(1.0, abs=1e-9)

    def test_shifted_example(self):
        # hand evaluation: 2*1.25 / (1.25 + 1.25 + 1) = 5/7
        a, b = [1, 2, 3, 4], [2, 3, 4, 5]
        expected = ccc_oracle(a, b)
        assert expected == pytest.approx(5.0 / 7.0, abs=1e-12)
        assert metrics.ccc(a, b) == pytest.approx(expected, abs=1e-12)

    def test_anticorrelated_equal_means(self):
        # perfect anti-correlation with equal means and variances: the
        # closed form 2*(-2/3)/(4/3) evaluates to -1 exactly
        a, b = [1, 2, 3], [3, 2, 1]
        expected = ccc_oracle(a, b)
        assert expected == pytest.approx(-1.0, abs=1e-9)
        assert metrics.ccc(a, b) == pytest.approx(expected, abs=1e-12)

    def test_constant_equal_sequences_degenerate_zero(self):
        assert metrics.ccc([2.0, 2.0, 2.0], [2.0, 2.0, 2.0]) == 0.0

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            metrics.ccc([1, 2], [1, 2, 3])

    def test_too_short(self):
        with pytest.raises(ValueError):
            metrics.ccc([1.0], [2.0])

    @given(finite_seq(), finite_seq())
    @settings(max_examples=60, deadline=None)
    def test_symmetry(self, a, b):
        n = min(len(a), len(b))
        a, b = a[:n], b[:n]
        assert metrics.ccc(a, b) == pytest.approx(metrics.ccc(b, a), abs=1e-12)

    @given(finite_seq(min_size=3))
    @settings(max_examples=60, deadline=None)
    def test_self_agreement(self, a):
        if np.var(a) > 1e-3:
            assert metrics.ccc(a, a) == pytest.approx(1.0, abs=1e-9)

    def test_bounded(self):
        for _ in range(200):
            n = int(rng.integers(2, 50))
            a = rng.normal(size=n) * rng.uniform(0.1, 10)
            b = rng.normal(size=n) * rng.uniform(0.1, 10)
            assert -1.0 - 1e-12 <= metrics.ccc(a, b) <= 1.0 + 1e-12


class TestPCC:
    def test_positive_affine(self):
        assert metrics.pcc([1, 2, 3], [10, 20, 30]) == pytest.approx(1.0, abs=1e-12)

    def test_negation(self):
        assert metrics.pcc([1, 2, 3], [3, 2, 1]) == pytest.approx(-1.0, abs=1e-12)

    def test_shift_invariance_contrast_with_ccc(self):
        a, b = [1, 2, 3, 4], [2, 3, 4, 5]
        assert metrics.pcc(a, b) == pytest.approx(1.0, abs=1e-12)
        assert metrics.ccc(a, b) < 1.0 - 1e-9

    def test_constant_input_guard(self):
        assert metrics.pcc([1.0, 1.0, 1.0], [1, 2, 3]) == 0.0

    def test_scale_location_penalty(self):
        for _ in range(100):
            n = int(rng.integers(3, 200))
            a = rng.normal(size=n)
            if np.var(a) < 1e-3:
                continue
            m = rng.uniform(1.1, 5.0) if rng.random() < 0.5 else rng.uniform(0.2, 0.9)
            c = rng.uniform(0.1, 2.0) * (1 if rng.random() < 0.5 else -1)
            b = m * a + c
            assert metrics.pcc(a, b) == pytest.approx(1.0, abs=1e-12)
            assert metrics.ccc(a, b) < 1.0 - 1e-9


class TestRMSE:
    def test_identical(self):
        a = [0.3, -0.4, 0.5]
        assert metrics.rmse(a, a) == 0.0

    def test_closed_form(self):
        expected = rmse_oracle([0, 0], [3, 4])
        assert expected == pytest.approx(np.sqrt(12.5), abs=1e-12)
        assert metrics.rmse([0, 0], [3, 4]) == pytest.approx(expected, abs=1e-12)

    def test_single_element(self):
        assert metrics.rmse([1.0], [-1.0]) == pytest.approx(2.0, abs=1e-15)

    @given(finite_seq(min_size=1))
    @settings(max_examples=40, deadline=None)
    def test_zero_iff_identical(self, a):
        assert metrics.rmse(a, a) == 0.0
        bumped = list(a)
        bumped[0] += 1.0
        assert metrics.rmse(a, bumped) > 0.0


class TestOracleEquivalence:
    def test_random_pairs(self):
        for _ in range(150):
            n = int(rng.integers(2, 500))
            a = rng.normal(size=n) * rng.uniform(0.5, 3)
            b = a * rng.uniform(-1, 2) + rng.normal(size=n) * rng.uniform(0, 2)
            assert metrics.ccc(a, b) == pytest.approx(ccc_oracle(a, b), abs=1e-12)
            assert metrics.pcc(a, b) == pytest.approx(pcc_oracle(a, b), abs=1e-12)
            assert metrics.rmse(a, b) == pytest.approx(rmse_oracle(a, b), abs=1e-12)

    def test_ccc_bounded_by_pcc(self):
        for _ in range(200):
            n = int(rng.integers(2, 100))
            a, b = rng.normal(size=n), rng.normal(size=n)
            assert abs(metrics.ccc(a, b)) <= abs(metrics.pcc(a, b)) + 1e-12


class TestReport:
    def test_fields(self):
        a = rng.normal(size=50)
        b = a + 0.1 * rng.normal(size=50)
        rep = metrics.report(a, b)
        assert rep.n == 50
        assert not rep.degenerate
        assert rep.ccc == pytest.approx(metrics.ccc(a, b))
        assert abs(rep.ccc) <= abs(rep.pcc) + 1e-12

    def test_degenerate_flag(self):
        rep = metrics.report([1.0, 1.0, 1.0], [1.0, 1.0, 1.0])
        assert rep.degenerate
        assert rep.ccc == 0.0
        assert rep.rmse == 0.0

    def test_pooled_is_concatenation(self):
        pairs = []
        for _ in range(4):
            n = int(rng.integers(5, 30))
            p = rng.normal(size=n)
            pairs.append((p, p + rng.normal(size=n)))
        pooled = metrics.pooled_report(pairs)
        cat_p = np.concatenate([p for p, _ in pairs])
        cat_t = np.concatenate([t for _, t in pairs])
        assert pooled.ccc == pytest.approx(metrics.ccc(cat_p, cat_t), abs=1e-15)
        assert pooled.n == cat_p.shape[0]


class TestInterRater:
    def test_identical_traces(self):
        a = rng.normal(size=40)
        assert metrics.inter_rater_agreement([a, a, a]) == pytest.approx(1.0, abs=1e-9)

    def test_two_traces_reduce_to_ccc(self):
        a, b = rng.normal(size=30), rng.normal(size=30)
        # mean(ccc(a, b), ccc(b, a)) = ccc(a, b) by symmetry
        assert metrics.inter_rater_agreement([a, b]) == pytest.approx(
            metrics.ccc(a, b), abs=1e-12
        )

    def test_permutation_invariance(self):
        traces = [rng.normal(size=25) for _ in range(5)]
        base = metrics.inter_rater_agreement(traces)
        for _ in range(5):
            perm = list(rng.permutation(5))
            shuffled = [traces[i] for i in perm]
            assert metrics.inter_rater_agreement(shuffled) == pytest.approx(
                base, abs=1e-12
            )

    def test_needs_two(self):
        with pytest.raises(ValueError):
            metrics.inter_rater_agreement([rng.normal(size=10)])

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            metrics.inter_rater_agreement([rng.normal(size=10), rng.normal(size=11)])
