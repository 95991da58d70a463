from collections import deque
from itertools import permutations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from latentline.distance_estimators import DistanceWindow, ExponentialEstimate, exact_oracle, exp_window
from latentline.errors import EmptyAnchorSet
from latentline.model_core import (
    ModelParams, PositionVector, expected_common_density, expected_degree_density, sample_positions,
)
from latentline.order_recovery import (
    TripleSet, collect_triples, flank_sets, oriented_edges, reachability_scores, recover_order,
)
from latentline.position_eval import inversion_report

W = exp_window(0.05)


def oracle(x, n=None):
    x = np.asarray(x, dtype=float)
    n = float(np.ceil(x.max())) if n is None else n
    return exact_oracle(PositionVector(n, x), W)


def dense_positions(n, step, seed, jitter=0.002):
    """Jittered grid whose consecutive gaps stay below delta / 2.

    n = 4 leaves room for the anchor argument, which needs n > U + 2L + 3 delta.
    """
    rng = np.random.default_rng(seed)
    base = np.arange(0.0, n, step)
    x = np.clip(base + rng.uniform(-jitter, jitter, base.size), 0, n)
    return rng.permutation(x)


def noisy_matrix(x, sigma, seed):
    rng = np.random.default_rng(seed)
    d = np.abs(x[:, None] - x[None, :])
    e = rng.normal(0, sigma, d.shape)
    D = np.abs(d + np.triu(e, 1) + np.triu(e, 1).T)
    np.fill_diagonal(D, 0)
    return D.astype(np.float32)


# --- literal reference ------------------------------------------------------

def reference_triples(D, w):
    f32 = np.float32
    lo, hi, margin = f32(w.flank_lo), f32(w.flank_hi), f32(3 * w.delta)
    floor = f32(2 * w.L - w.delta)
    m = D.shape[0]
    S = set()
    for i, j, k in permutations(range(m), 3):
        if not (lo <= D[i, j] <= hi and lo <= D[j, k] <= hi):
            continue
        if D[i, k] > abs(D[i, j] - D[j, k]) + margin and D[i, k] >= floor:
            S.add((i, j, k))
    return S


def reference_edges(D, w):
    """Explicit triple set and edge set, edges processed first in first out."""
    m = D.shape[0]
    S = reference_triples(D, w)
    middles = {j for _, j, _ in S}
    free = [v for v in range(m) if v not in middles]
    if not free:
        return None, None
    v0 = free[0]
    V0 = [v for v in free if D[v0, v] > np.float32(w.U - w.delta)]
    if not V0:
        return None, v0
    lo, hi = np.float32(w.flank_lo), np.float32(w.flank_hi)
    E, queue = set(), deque()
    for v in V0:
        for u in range(m):
            if u != v and lo <= D[v, u] <= hi and (v, u) not in E:
                E.add((v, u))
                queue.append((v, u))
    while queue:
        i, j = queue.popleft()
        for k in range(m):
            if (i, j, k) in S:
                if (j, k) not in E:
                    E.add((j, k))
                    queue.append((j, k))
                S.discard((i, j, k))
                S.discard((k, j, i))
    # fixpoint of the loop: no remaining triple can fire
    assert not any((i, j) in E for i, j, _ in S)
    return E, v0


def reference_scores(m, E):
    adj = [[] for _ in range(m)]
    for a, b in E:
        adj[a].append(b)
    reach = np.zeros((m, m), dtype=bool)
    for s in range(m):
        seen, stack = {s}, [s]
        while stack:
            for b in adj[stack.pop()]:
                if b not in seen:
                    seen.add(b)
                    stack.append(b)
        seen.discard(s)
        reach[s, list(seen)] = True
    return reach.sum(axis=0) - reach.sum(axis=1), reach


# --- tests ------------------------------------------------------------------

class TestCollectTriples:

    def test_three_equally_spaced(self):
        g = W.L + 2 * W.delta
        S = collect_triples(oracle([1.0, 1.0 + g, 1.0 + 2 * g], n=3.0))
        assert sorted(S) == [(0, 1, 2), (2, 1, 0)]

    def test_two_vertices(self):
        assert len(collect_triples(oracle([1.0, 1.5], n=3.0))) == 0

    def test_collinear_not_middle(self):
        # vertex 2 lies beyond vertex 1, so 1 is the middle and 2 never is
        S = collect_triples(oracle([1.0, 1.5, 2.0], n=3.0))
        assert (0, 2, 1) not in S and (1, 0, 2) not in S
        assert set(S) == {(0, 1, 2), (2, 1, 0)}

    def test_clamped_close_flanks_not_middle(self):
        # two flanks on the same side whose gap is reported at the lower clamp L
        x = np.array([1.0, 1.40, 1.45])
        D = np.clip(np.abs(x[:, None] - x[None, :]), W.L, W.U).astype(np.float32)
        np.fill_diagonal(D, 0)
        assert D[1, 2] > abs(D[0, 1] - D[0, 2]) + 3 * W.delta
        assert len(collect_triples(D, window=W)) == 0

    def test_both_orientations(self, rng):
        S = collect_triples(noisy_matrix(rng.uniform(0, 3, 60), 0.05, 1), window=W)
        for i, j, k in S:
            assert (k, j, i) in S

    def test_matches_reference(self, rng):
        for seed in range(3):
            D = noisy_matrix(rng.uniform(0, 3, 40), 0.03, seed)
            assert set(collect_triples(D, window=W)) == reference_triples(D, W)

    def test_triple_set_queries(self):
        S = TripleSet([(0, 1, 2), (2, 1, 0), (3, 1, 0)], 4)
        assert list(S.continuations(0, 1)) == [2]
        assert (3, 1, 0) in S and (0, 1, 3) not in S
        assert list(S.middles()) == [1]

    def test_middle_correct_exhaustive(self):
        x = dense_positions(4.0, 0.02, 5)
        assert x.size <= 200
        S = collect_triples(oracle(x, n=4.0))
        assert len(S) > 0
        for i, j, k in S:
            assert min(x[i], x[k]) < x[j] < max(x[i], x[k])

    def test_flank_sets_sorted(self, rng):
        D = oracle(rng.uniform(0, 3, 80), n=3.0).matrix()
        indptr, idx, vals = flank_sets(D, W)
        for j in range(80):
            row = idx[indptr[j]:indptr[j + 1]]
            assert np.all(np.diff(row) > 0)
            assert np.all((vals[indptr[j]:indptr[j + 1]] >= np.float32(W.flank_lo)))


class TestSaturationReference:

    @pytest.mark.parametrize("sigma", [0.0, 0.02, 0.06])
    @pytest.mark.parametrize("seed", range(4))
    def test_edges_and_order_match_literal_loop(self, sigma, seed):
        rng = np.random.default_rng(seed)
        x = np.sort(rng.uniform(0, 3, 45))
        x[0], x[-1] = 0.0, 3.0
        D = noisy_matrix(rng.permutation(x), sigma, seed)
        E, v0 = reference_edges(D, W)
        if E is None:
            with pytest.raises(EmptyAnchorSet):
                recover_order(D, window=W)
            return
        src, dst, anchor, _ = oriented_edges(D, W)
        assert anchor == v0
        assert set(zip(src.tolist(), dst.tolist())) == E
        assert len(E) == src.size
        expected, _ = reference_scores(45, E)
        res = recover_order(D, window=W)
        assert np.array_equal(res.scores, expected)
        assert np.array_equal(res.order, np.lexsort((np.arange(45), expected)))


class TestExactOracle:

    def test_single_vertex(self):
        res = recover_order(oracle([0.7], n=3.0))
        assert res.order.tolist() == [0]

    def test_grid(self):
        x = np.round(np.arange(31) * 0.1, 10)
        res = recover_order(oracle(x, n=4.0))
        asc = list(range(31))
        assert res.order.tolist() in (asc, asc[::-1])

    def test_shuffled_grid(self, rng):
        x = np.round(np.arange(31) * 0.1, 10)
        perm = rng.permutation(31)
        res = recover_order(oracle(x[perm], n=3.0))
        got = x[perm][res.order]
        assert np.all(np.diff(got) > 0) or np.all(np.diff(got) < 0)

    @pytest.mark.parametrize("seed", range(5))
    def test_uniform_2000(self, seed):
        p = ModelParams(25.0, 1.0, "exp", 0.05)
        X = sample_positions(2000, p, seed)
        res = recover_order(exact_oracle(X, W))
        rep = inversion_report(X, res.order)
        assert rep.percentiles.max <= 3 * 0.05

    @pytest.mark.parametrize("seed", range(3))
    def test_edge_orientation_soundness(self, seed):
        x = dense_positions(4.0, 0.02, seed)
        src, dst, anchor, _ = oriented_edges(oracle(x, n=4.0).matrix(), W)
        sign = 1 if x[anchor] > 2.0 else -1
        assert src.size > 0
        assert np.all(sign * (x[dst] - x[src]) > 0)

    @pytest.mark.parametrize("seed", range(3))
    def test_reachability_characterization(self, seed):
        x = dense_positions(4.0, 0.02, seed)
        D = oracle(x, n=4.0).matrix()
        src, dst, anchor, _ = oriented_edges(D, W)
        _, reach = reference_scores(x.size, set(zip(src.tolist(), dst.tolist())))
        sign = 1 if x[anchor] > 2.0 else -1
        left_of = sign * (x[None, :] - x[:, None]) > 0
        assert np.array_equal(reach, left_of & (D >= np.float32(W.L + W.delta)))

    @pytest.mark.parametrize("seed", range(3))
    def test_bounded_noise_keeps_order(self, seed):
        # any perturbation inside +-delta is still a valid approximation
        rng = np.random.default_rng(seed)
        x = dense_positions(4.0, 0.02, seed)
        d = np.abs(x[:, None] - x[None, :])
        e = np.triu(rng.uniform(-0.05, 0.05, d.shape), 1)
        D = np.clip(d + e + e.T, 0, None).astype(np.float32)
        np.fill_diagonal(D, 0)
        res = recover_order(D, window=W)
        got = x[res.order]
        if got[0] > got[-1]:
            got = got[::-1]
        # every pair at distance >= 3 delta appears in order
        worst = np.maximum.accumulate(got) - got
        assert worst.max() < 3 * 0.05

    @pytest.mark.parametrize("seed", range(3))
    def test_clamped_oracle_keeps_order(self, seed):
        # estimators clamp to [L, U]; that is still a valid approximation
        x = dense_positions(4.0, 0.02, seed)
        D = np.clip(np.abs(x[:, None] - x[None, :]), W.L, W.U).astype(np.float32)
        np.fill_diagonal(D, 0)
        got = x[recover_order(D, window=W).order]
        if got[0] > got[-1]:
            got = got[::-1]
        assert (np.maximum.accumulate(got) - got).max() < 3 * 0.05


class TestExactStatistics:

    def test_estimator_pipeline(self):
        # the graph estimator fed expected degrees and common counts, end to end
        p = ModelParams(6.0, 1.0, "exp", 0.099)
        m = 1000
        x = sample_positions(m, p, 5).positions
        deg = [(m - 1) * expected_degree_density(p, v) for v in x]
        est = ExponentialEstimate(deg, lambda i, j: (m - 2) * expected_common_density(p, x[i], x[j]), p, m)
        got = x[recover_order(est).order]
        if got[0] > got[-1]:
            got = got[::-1]
        assert (np.maximum.accumulate(got) - got).max() < 3 * 0.099


class TestAnchorAndErrors:

    def test_empty_v_prime(self):
        # a 4-cycle of distances where every vertex is a certified middle
        g = 0.6
        D = np.full((4, 4), np.float32(1.2))
        for v in range(4):
            D[v, (v + 1) % 4] = D[(v + 1) % 4, v] = g
        np.fill_diagonal(D, 0)
        with pytest.raises(EmptyAnchorSet):
            recover_order(D.astype(np.float32), window=W)

    def test_empty_v0(self):
        # points span less than U - delta, so the anchor has no distant partner
        with pytest.raises(EmptyAnchorSet):
            recover_order(oracle(np.linspace(0, 2.0, 30), n=3.0))

    def test_two_vertices_far_apart(self):
        res = recover_order(oracle([0.0, 2.9], n=3.0))
        assert sorted(res.order.tolist()) == [0, 1]
        assert res.anchor == 0 and res.oriented_graph_size == 0

    def test_anchor_is_lowest_free(self):
        x = dense_positions(4.0, 0.05, 2)
        D = oracle(x, n=4.0).matrix()
        S = collect_triples(D, window=W)
        free = sorted(set(range(x.size)) - set(S.middles().tolist()))
        assert recover_order(D, window=W).anchor == free[0]

    def test_size_mismatch(self):
        with pytest.raises(ValueError):
            recover_order(oracle([0.0, 2.9], n=3.0), m=3)


class TestReachabilityScores:

    def test_chain(self):
        scores, ncomp = reachability_scores(4, [0, 1, 2], [1, 2, 3])
        assert scores.tolist() == [-3, -1, 1, 3] and ncomp == 4

    def test_cycle_shares_score(self):
        scores, ncomp = reachability_scores(5, [0, 1, 2, 2], [1, 2, 0, 3])
        assert scores[0] == scores[1] == scores[2]
        assert ncomp == 3 and scores[4] == 0

    def test_empty(self):
        scores, ncomp = reachability_scores(3, [], [])
        assert scores.tolist() == [0, 0, 0] and ncomp == 3

    @settings(max_examples=60)
    @given(st.integers(2, 30).flatmap(
        lambda m: st.tuples(st.just(m), st.lists(st.tuples(st.integers(0, m - 1), st.integers(0, m - 1)),
                                                   max_size=80))))
    def test_matches_brute_force(self, case):
        m, edges = case
        edges = [(a, b) for a, b in edges if a != b]
        src = [a for a, _ in edges]
        dst = [b for _, b in edges]
        scores, _ = reachability_scores(m, src, dst)
        expected, _ = reference_scores(m, set(edges))
        assert np.array_equal(scores, expected)

    def test_sums_to_zero(self, rng):
        src = rng.integers(0, 200, 600)
        dst = rng.integers(0, 200, 600)
        keep = src != dst
        scores, _ = reachability_scores(200, src[keep], dst[keep])
        assert scores.sum() == 0


class TestDeterminism:

    def test_repeat(self):
        # noisy enough to leave cycles in the oriented graph
        D = noisy_matrix(np.sort(np.random.default_rng(1).uniform(0, 4, 120)), 0.04, 3)
        a = recover_order(D, window=W)
        b = recover_order(D.copy(), window=W)
        assert a.components < 120
        assert np.array_equal(a.order, b.order) and np.array_equal(a.scores, b.scores)

    def test_permutation_equivariance_exact(self, rng):
        x = dense_positions(4.0, 0.02, 9)
        res = recover_order(oracle(x, n=4.0))
        got = x[res.order]
        if got[0] > got[-1]:
            got = got[::-1]
        assert (np.maximum.accumulate(got) - got).max() < 0.15

    def test_custom_window(self):
        w = DistanceWindow(0.4, 2.5, 0.05)
        x = np.linspace(0, 3, 120)
        res = recover_order(exact_oracle(PositionVector(3.0, x), w))
        assert res.order.tolist() in (list(range(120)), list(range(119, -1, -1)))
