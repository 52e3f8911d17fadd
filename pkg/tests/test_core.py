import json
import math

import numpy as np
import pytest

from ctxldp.core import (
    Channel,
    Distribution,
    Partition,
    PrivacyMatrix,
    RawEstimate,
    SensitiveSet,
    apply_channel,
    block_budgets,
    channel_from_dict,
    channel_to_dict,
    distribution_from_dict,
    distribution_to_dict,
    high_low_budgets,
    l2_sq_distance,
    privacy_matrix_from_dict,
    privacy_matrix_to_dict,
    sylvester,
    tv_distance,
    uniform_budgets,
    validate_triangle,
)
from util import random_channel, random_distribution


class TestHadamard:
    def test_order_one(self):
        assert sylvester(1).to_array().tolist() == [[1]]

    def test_order_two(self):
        assert sylvester(2).to_array().tolist() == [[1, 1], [1, -1]]

    def test_order_four_second_row(self):
        H = sylvester(4)
        assert H.row_signs(1).tolist() == [1, -1, 1, -1]
        assert H.plus_set(1).tolist() == [0, 2]
        assert H.plus_set(2).tolist() == [0, 1]

    def test_first_row_all_ones(self):
        H = sylvester(8)
        assert H.plus_set(0).tolist() == list(range(8))

    @pytest.mark.parametrize("K", [3, 0, -2, 12, 24])
    def test_rejects_non_powers_of_two(self, K):
        with pytest.raises(ValueError):
            sylvester(K)

    def test_out_of_range_row(self):
        with pytest.raises(IndexError):
            sylvester(4).plus_set(4)
        with pytest.raises(IndexError):
            sylvester(4).row_signs(-1)

    def test_matches_doubling_recursion(self):
        # H_{2m} = [[H_m, H_m], [H_m, -H_m]] starting from [1]
        ref = np.array([[1]])
        for K in (2, 4, 8, 16, 32):
            ref = np.block([[ref, ref], [ref, -ref]])
            assert np.array_equal(sylvester(K).to_array(), ref)

    @pytest.mark.parametrize("t", range(1, 13))
    def test_row_sums_and_plus_set_sizes(self, t):
        K = 1 << t
        H = sylvester(K)
        rows = range(1, K) if K <= 64 else np.random.default_rng(t).integers(1, K, size=40)
        for r in rows:
            signs = H.row_signs(int(r))
            assert signs.sum() == 0
            assert H.plus_set(int(r)).size == K // 2

    @pytest.mark.parametrize("t", range(2, 13))
    def test_pairwise_intersections(self, t):
        # |S_i & S_j| = K/4 via orthogonality: <row_i, row_j> = 0 for i != j
        K = 1 << t
        H = sylvester(K)
        if K <= 256:
            arr = H.to_array()
            gram = arr @ arr.T
            assert np.array_equal(gram, K * np.eye(K, dtype=np.int64))
        else:
            rng = np.random.default_rng(K)
            for _ in range(60):
                i, j = rng.integers(1, K, size=2)
                if i == j:
                    continue
                si, sj = H.row_signs(int(i)), H.row_signs(int(j))
                assert int(si @ sj) == 0
                inter = np.intersect1d(H.plus_set(int(i)), H.plus_set(int(j))).size
                assert inter == K // 4


class TestDistances:
    def test_tv_examples(self):
        p = Distribution([0.6, 0.4])
        assert tv_distance(p, p) == 0
        assert tv_distance(Distribution([1, 0]), Distribution([0, 1])) == 1
        assert tv_distance(p, Distribution([0.4, 0.6])) == pytest.approx(0.2, abs=1e-15)

    def test_l2_examples(self):
        p, q = Distribution([0.6, 0.4]), Distribution([0.4, 0.6])
        assert l2_sq_distance(p, p) == 0
        assert l2_sq_distance(Distribution([1, 0]), Distribution([0, 1])) == 2
        assert l2_sq_distance(p, q) == pytest.approx(0.08, abs=1e-15)

    def test_size_mismatch(self):
        with pytest.raises(ValueError):
            tv_distance(Distribution([1.0]), Distribution([0.5, 0.5]))
        with pytest.raises(ValueError):
            l2_sq_distance(Distribution([1.0]), Distribution([0.5, 0.5]))

    def test_metric_properties(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            k = int(rng.integers(2, 12))
            p, q, r = (random_distribution(rng, k) for _ in range(3))
            assert tv_distance(p, q) == pytest.approx(tv_distance(q, p), abs=1e-15)
            assert tv_distance(p, p) == 0
            assert tv_distance(p, q) <= tv_distance(p, r) + tv_distance(r, q) + 1e-12

    @pytest.mark.parametrize("k", range(2, 11))
    def test_tv_equals_max_event_gap(self, k):
        rng = np.random.default_rng(k)
        p, q = random_distribution(rng, k), random_distribution(rng, k)
        best = 0.0
        for mask in range(1 << k):
            sel = [(mask >> i) & 1 == 1 for i in range(k)]
            best = max(best, abs(p.weights[sel].sum() - q.weights[sel].sum()))
        assert tv_distance(p, q) == pytest.approx(best, abs=1e-12)

    def test_accepts_raw_estimates(self):
        v = RawEstimate([-0.5, 1.5])
        assert tv_distance(v, Distribution([0.5, 0.5])) == pytest.approx(1.0)


class TestApplyChannel:
    def test_identity(self):
        p = Distribution([0.2, 0.3, 0.5])
        assert np.allclose(apply_channel(Channel.identity(3), p).weights, p.weights)

    def test_constant_rows(self):
        u = Distribution([0.1, 0.9])
        out = apply_channel(Channel.constant(5, u), Distribution([0.5, 0.1, 0.1, 0.2, 0.1]))
        assert np.allclose(out.weights, u.weights)

    def test_warner_on_point_mass(self):
        w = math.e / (math.e + 1)
        warner = Channel([[w, 1 - w], [1 - w, w]])
        # with e^eps = 3 the flip probability is 1/4
        warner3 = Channel([[0.75, 0.25], [0.25, 0.75]])
        out = apply_channel(warner3, Distribution([1, 0]))
        assert np.allclose(out.weights, [0.75, 0.25])
        assert apply_channel(warner, Distribution([0.5, 0.5])).weights == pytest.approx([0.5, 0.5])

    def test_simplex_preserved(self):
        rng = np.random.default_rng(3)
        for _ in range(30):
            k_in, k_out = rng.integers(2, 10, size=2)
            out = apply_channel(random_channel(rng, int(k_in), int(k_out)), random_distribution(rng, int(k_in)))
            assert isinstance(out, Distribution)

    def test_size_mismatch(self):
        with pytest.raises(ValueError):
            apply_channel(Channel.identity(3), Distribution([0.5, 0.5]))


class TestBudgetMatrices:
    def test_uniform(self):
        E = uniform_budgets(3, 1.5)
        off = ~np.eye(3, dtype=bool)
        assert np.all(E.eps[off] == 1.5)
        assert np.all(np.diag(E.eps) == 0)

    def test_high_low(self):
        E = high_low_budgets(SensitiveSet(3, 1), 2.0)
        assert E.eps[0, 1] == 2.0 and E.eps[0, 2] == 2.0
        assert math.isinf(E.eps[1, 0]) and math.isinf(E.eps[2, 1])

    def test_block(self):
        E = block_budgets(Partition.from_sizes([2, 1]), 0.7)
        assert E.eps[0, 1] == 0.7 and E.eps[1, 0] == 0.7
        assert math.isinf(E.eps[0, 2]) and math.isinf(E.eps[2, 0]) and math.isinf(E.eps[1, 2])

    def test_rejects_bad_eps(self):
        with pytest.raises(ValueError):
            uniform_budgets(2, 0.0)
        with pytest.raises(ValueError):
            block_budgets(Partition.from_sizes([2]), -1.0)

    def test_triangle_uniform_and_block_clean(self):
        assert validate_triangle(uniform_budgets(4, 1.0)) == []
        assert validate_triangle(block_budgets(Partition.from_sizes([2, 3]), 1.0)) == []
        assert validate_triangle(high_low_budgets(SensitiveSet(4, 2), 1.0)) == []

    def test_triangle_violation(self):
        E = PrivacyMatrix([[0, 1, 5], [1, 0, 1], [5, 1, 0]])
        assert (0, 2, 1) in validate_triangle(E)


class TestTypeValidation:
    def test_distribution_invariants(self):
        with pytest.raises(ValueError):
            Distribution([0.5, 0.6])
        with pytest.raises(ValueError):
            Distribution([-0.1, 1.1])
        with pytest.raises(ValueError):
            Distribution([])

    def test_distribution_is_readonly(self):
        p = Distribution([0.5, 0.5])
        with pytest.raises(ValueError):
            p.weights[0] = 1.0

    def test_channel_invariants(self):
        with pytest.raises(ValueError):
            Channel([[0.5, 0.6], [0.5, 0.5]])
        with pytest.raises(ValueError):
            Channel([[1.2, -0.2], [0.5, 0.5]])
        with pytest.raises(ValueError):
            Channel([[0.5, 0.5]], labels=[(0, 0)])

    def test_privacy_matrix_invariants(self):
        with pytest.raises(ValueError):
            PrivacyMatrix([[1.0, 0.5], [0.5, 0.0]])  # nonzero diagonal
        with pytest.raises(ValueError):
            PrivacyMatrix([[0.0, -1.0], [1.0, 0.0]])
        PrivacyMatrix([[0.0, math.inf], [1.0, 0.0]])  # inf allowed

    def test_partition_invariants(self):
        with pytest.raises(ValueError):
            Partition([0, 2, 2])  # block 1 empty
        part = Partition.from_sizes([2, 3])
        assert part.k == 5 and part.m == 2
        assert part.sizes.tolist() == [2, 3]
        assert part.members(1).tolist() == [2, 3, 4]

    def test_sensitive_set_invariants(self):
        with pytest.raises(ValueError):
            SensitiveSet(3, 0)
        with pytest.raises(ValueError):
            SensitiveSet(3, 4)
        assert list(SensitiveSet(5, 2).members) == [0, 1]


class TestSerialization:
    def test_distribution_roundtrip(self):
        p = Distribution([0.25, 0.75])
        d = distribution_to_dict(p)
        assert d == {"k": 2, "weights": [0.25, 0.75]}
        assert np.allclose(distribution_from_dict(json.loads(json.dumps(d))).weights, p.weights)

    def test_channel_roundtrip_with_labels(self):
        Q = Channel([[0.5, 0.5, 0.0], [0.0, 0.5, 0.5]], labels=[(0, 0), (0, 1), (1, 0)])
        back = channel_from_dict(json.loads(json.dumps(channel_to_dict(Q))))
        assert np.allclose(back.rows, Q.rows)
        assert back.labels == Q.labels

    def test_privacy_matrix_roundtrip_with_inf(self):
        E = high_low_budgets(SensitiveSet(3, 1), 1.0)
        d = privacy_matrix_to_dict(E)
        assert d["eps"][1][0] == "inf"
        back = privacy_matrix_from_dict(json.loads(json.dumps(d)))
        assert np.array_equal(back.eps, E.eps)

    def test_declared_size_mismatch(self):
        with pytest.raises(ValueError):
            distribution_from_dict({"k": 3, "weights": [0.5, 0.5]})
