import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from itertools import permutations

from nlmtl.kernels import KernelSpec
from nlmtl.ranking import (
    PairIndex,
    RankingModel,
    Tournament,
    _complete_order,
    build_pair_datasets,
    decode,
    decode_costs,
    fas_order,
    fit_ranking,
    labels_acyclic,
    loss_pairwise,
    loss_weighted,
    pair_costs,
)
from nlmtl.scores import TaskData, alpha_at, fit_scores

GAUSS = KernelSpec("gaussian", 0.5)


def brute_force_optimum(n_docs, costs):
    best = None
    for perm in permutations(range(1, n_docs + 1)):
        _, obj = _complete_order(n_docs, perm, costs)
        if best is None or obj < best:
            best = obj
    return best


class TestPairIndex:
    def test_bijection(self):
        idx = PairIndex(6)
        assert idx.n_pairs == 15
        for t, (p, q) in enumerate(idx.pairs()):
            assert idx.to_flat(p, q) == t
            assert idx.from_flat(t) == (p, q)

    def test_lexicographic_order(self):
        assert PairIndex(4).pairs() == [(1, 2), (1, 3), (1, 4), (2, 3), (2, 4), (3, 4)]

    def test_invalid_pairs(self):
        idx = PairIndex(4)
        for p, q in ((2, 2), (3, 1), (0, 1), (1, 5)):
            with pytest.raises(ValueError):
                idx.to_flat(p, q)


class TestFit:
    def test_two_docs_reduce_to_single_ridge(self):
        rng = np.random.default_rng(0)
        td = TaskData(x=rng.normal(size=(10, 1)), y=rng.choice([-1.0, 1.0], 10))
        model = fit_ranking(2, [td], GAUSS, 1e-3)
        direct = fit_scores(GAUSS, td, 1e-3)
        q = np.array([0.1])
        assert np.array_equal(alpha_at(model.pair_models[0], q), alpha_at(direct, q))

    def test_pair_independence(self):
        rng = np.random.default_rng(1)
        tds = [TaskData(x=rng.normal(size=(8, 1)), y=rng.choice([-1.0, 1.0], 8))
               for _ in range(3)]
        m1 = fit_ranking(3, tds, GAUSS, 1e-3)
        other = TaskData(x=rng.normal(size=(5, 1)), y=rng.choice([-1.0, 1.0], 5))
        m2 = fit_ranking(3, [other, tds[1], tds[2]], GAUSS, 1e-3)
        for t in (1, 2):
            assert np.array_equal(m1.pair_models[t].chol, m2.pair_models[t].chol)

    def test_uninformed_pair(self):
        rng = np.random.default_rng(2)
        td = TaskData(x=rng.normal(size=(6, 1)), y=np.ones(6))
        model = fit_ranking(3, [td, None, td], GAUSS, 1e-3)
        assert model.pair_models[1] is None
        costs = pair_costs(model, [0.0])
        assert np.array_equal(costs[1], np.zeros(3))
        res = decode(model, [0.0])
        assert labels_acyclic(3, res.labels)

    def test_constant_positive_labels_decode_positive(self):
        rng = np.random.default_rng(3)
        x = rng.uniform(-1, 1, size=(12, 1))
        td = TaskData(x=x, y=np.ones(12))
        model = fit_ranking(2, [td], GAUSS, 1e-6)
        res = decode(model, x[0])
        assert res.labels[0] == 1


class TestPairCosts:
    def test_unanimous_labels(self):
        rng = np.random.default_rng(4)
        x = rng.uniform(-1, 1, size=(9, 1))
        model = fit_ranking(2, [TaskData(x=x, y=np.ones(9))], GAUSS, 1e-3)
        q = x[0]
        costs = pair_costs(model, q)
        alpha_sum = alpha_at(model.pair_models[0], q).sum()
        assert costs[0, 2] == 0.0                       # label +1 never misses
        assert costs[0, 0] == pytest.approx(alpha_sum)  # -1 misses everywhere
        assert costs[0, 1] == pytest.approx(alpha_sum)

    def test_single_example_costs(self):
        # k(x,x)=1 and lambda=1 give alpha(x) = 1/2 at the training point
        model = fit_ranking(2, [TaskData(x=[[0.0]], y=[1.0])], GAUSS, 1.0)
        costs = pair_costs(model, [0.0])
        np.testing.assert_allclose(costs[0], [0.5, 0.5, 0.0], atol=1e-12)

    def test_matches_brute_force_resummation(self):
        rng = np.random.default_rng(5)
        for weighted in (False, True):
            labels = rng.choice([-1.0, 0.0, 1.0], 10) if not weighted \
                else rng.uniform(-2, 2, 10)
            td = TaskData(x=rng.normal(size=(10, 1)), y=labels)
            model = fit_ranking(2, [td], GAUSS, 1e-2, weighted=weighted)
            q = rng.normal(size=1)
            alpha = alpha_at(model.pair_models[0], q)
            got = pair_costs(model, q)
            for j, v in enumerate((-1, 0, 1)):
                if weighted:
                    want = sum(al * abs(y) * (np.sign(y) != v) for al, y in zip(alpha, labels))
                else:
                    want = sum(al * (y != v) for al, y in zip(alpha, labels))
                assert got[0, j] == pytest.approx(want, abs=1e-12)

    def test_weighted_costs_scale_with_labels(self):
        # alpha depends only on inputs, so doubling the stored labels
        # exactly doubles every weighted cost
        rng = np.random.default_rng(6)
        x = rng.normal(size=(8, 1))
        y = rng.uniform(-2, 2, 8)
        m1 = fit_ranking(2, [TaskData(x=x, y=y)], GAUSS, 1e-2, weighted=True)
        m2 = fit_ranking(2, [TaskData(x=x, y=2 * y)], GAUSS, 1e-2, weighted=True)
        q = rng.normal(size=1)
        np.testing.assert_allclose(pair_costs(m2, q), 2 * pair_costs(m1, q), atol=1e-12)


class TestFasOrder:
    def test_transitive_tournament_recovered(self):
        D = 6
        W = np.zeros((D, D))
        rng = np.random.default_rng(7)
        for i in range(D):
            for j in range(i + 1, D):
                W[i, j] = rng.uniform(0.1, 2.0)
        assert fas_order(Tournament(W)) == [1, 2, 3, 4, 5, 6]

    def test_three_cycle_single_back_edge(self):
        W = np.zeros((3, 3))
        W[0, 1] = W[1, 2] = W[2, 0] = 1.0
        order = fas_order(Tournament(W))
        pos = {d: i for i, d in enumerate(order)}
        back = sum(W[u, v] for u in range(3) for v in range(3)
                   if W[u, v] > 0 and pos[u + 1] > pos[v + 1])
        assert back == 1.0

    def test_acyclic_input_zero_back_weight(self):
        rng = np.random.default_rng(8)
        for _ in range(10):
            D = int(rng.integers(3, 8))
            perm = rng.permutation(D)
            W = np.zeros((D, D))
            for i in range(D):
                for j in range(i + 1, D):
                    if rng.random() < 0.7:
                        W[perm[i], perm[j]] = rng.uniform(0.1, 1.0)
            order = fas_order(Tournament(W))
            pos = {d: i for i, d in enumerate(order)}
            back = sum(W[u, v] for u in range(D) for v in range(D)
                       if W[u, v] > 0 and pos[u + 1] > pos[v + 1])
            assert back == 0.0

    def test_back_weight_never_exceeds_forward(self):
        rng = np.random.default_rng(9)
        for _ in range(50):
            D = int(rng.integers(3, 9))
            W = np.zeros((D, D))
            for i in range(D):
                for j in range(D):
                    if i != j and W[j, i] == 0 and rng.random() < 0.5:
                        W[i, j] = rng.uniform(0, 2)
            order = fas_order(Tournament(W))
            pos = {d: i for i, d in enumerate(order)}
            back = sum(W[u, v] for u in range(D) for v in range(D)
                       if pos[u + 1] > pos[v + 1])
            assert back <= W.sum() - back + 1e-12

    def test_unweighted_removal_guarantee(self):
        # random tournaments: removed edges <= |E|/2 - |V|/6
        rng = np.random.default_rng(10)
        for _ in range(100):
            D = int(rng.integers(3, 13))
            W = np.zeros((D, D))
            for i in range(D):
                for j in range(i + 1, D):
                    if rng.random() < 0.5:
                        W[i, j] = 1.0
                    else:
                        W[j, i] = 1.0
            order = fas_order(Tournament(W))
            pos = {d: i for i, d in enumerate(order)}
            removed = sum(1 for u in range(D) for v in range(D)
                          if W[u, v] > 0 and pos[u + 1] > pos[v + 1])
            m = W.sum()
            assert removed <= m / 2 - D / 6 + 1e-9


class TestDecode:
    def test_two_docs_positive(self):
        costs = np.array([[1.0, 0.7, 0.1]])
        res = decode_costs(2, costs)
        assert res.labels[0] == 1

    def test_all_zero_costs_abstain(self):
        res = decode_costs(4, np.zeros((6, 3)))
        assert np.array_equal(res.labels, np.zeros(6, dtype=int))
        assert res.objective == 0.0

    def test_beats_identity_order(self):
        rng = np.random.default_rng(11)
        for _ in range(20):
            costs = rng.uniform(0, 1, (6, 3))
            res = decode_costs(4, costs)
            _, identity_obj = _complete_order(4, [1, 2, 3, 4], costs)
            assert res.objective <= identity_obj + 1e-12

    def test_exact_matches_brute_force(self):
        rng = np.random.default_rng(12)
        for _ in range(10):
            costs = rng.uniform(0, 1, (6, 3))
            res = decode_costs(4, costs, exact=True)
            assert res.objective == pytest.approx(brute_force_optimum(4, costs))

    def test_exact_bound(self):
        with pytest.raises(ValueError):
            decode_costs(9, np.zeros((36, 3)), exact=True)

    @given(st.integers(0, 10_000))
    @settings(max_examples=80, deadline=None)
    def test_always_acyclic(self, seed):
        rng = np.random.default_rng(seed)
        D = int(rng.integers(2, 7))
        costs = rng.uniform(0, 1, (D * (D - 1) // 2, 3))
        res = decode_costs(D, costs)
        assert labels_acyclic(D, res.labels)

    def test_rescaling_invariance(self):
        rng = np.random.default_rng(13)
        costs = rng.uniform(0, 1, (10, 3))
        a = decode_costs(5, costs)
        b = decode_costs(5, 3.7 * costs)
        assert a.order == b.order
        assert np.array_equal(a.labels, b.labels)

    def test_objective_matches_label_costs(self):
        rng = np.random.default_rng(14)
        costs = rng.uniform(0, 1, (10, 3))
        res = decode_costs(5, costs)
        picked = sum(costs[t, int(res.labels[t]) + 1] for t in range(10))
        assert res.objective == pytest.approx(picked)

    def test_to_dict_schema(self):
        res = decode_costs(3, np.zeros((3, 3)))
        d = res.to_dict()
        assert set(d) == {"order", "labels", "objective"}
        assert set(d["labels"]) == {"1,2", "1,3", "2,3"}


class TestLosses:
    def test_exact_match_zero(self):
        y = np.array([1, -1, 0])
        assert loss_pairwise(y, y) == 0
        assert loss_weighted(np.sign(y), y * 2.0) == 0.0

    def test_all_pairs_differ(self):
        assert loss_pairwise([1, 1, 1], [-1, 0, -1]) == 3

    def test_weighted_magnitude(self):
        assert loss_weighted([-1], [2.0]) == 2.0
        assert loss_weighted([1], [2.0]) == 0.0

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            loss_pairwise([1, 1], [1])


class TestRoundTrip:
    def test_model_json(self, tmp_path):
        rng = np.random.default_rng(15)
        tds = [TaskData(x=rng.normal(size=(6, 2)), y=rng.choice([-1.0, 1.0], 6)),
               None,
               TaskData(x=rng.normal(size=(4, 2)), y=rng.choice([-1.0, 1.0], 4))]
        model = fit_ranking(3, tds, GAUSS, 1e-3, weighted=True)
        path = tmp_path / "rank.json"
        model.save(path)
        loaded = RankingModel.load(path)
        q = rng.normal(size=2)
        np.testing.assert_array_equal(pair_costs(loaded, q), pair_costs(model, q))

    def test_build_pair_datasets_orients_pairs(self):
        # rows with p > q are flipped and their label negated
        feats = np.array([[0.0], [1.0]])
        out = build_pair_datasets(3, feats, [2, 1], [1, 2], [1.0, 1.0])
        assert out[0].n == 2
        np.testing.assert_array_equal(out[0].y, [-1.0, 1.0])
        assert out[1] is None and out[2] is None
