import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from multisupport.boosting import match_distance
from multisupport.estimator import (AffinityMatrix, RecoveryOptions, affinity_matrix, cluster_supports,
                                    estimate_union_size, mean_proxy, proxy_batch, recover,
                                    recover_from_proxies, recover_overlapping_two, recover_union,
                                    split_second_eigenvector, two_largest_drops, variance_proxies,
                                    variance_proxy)
from multisupport.model import Dataset, ModelParams, SupportTuple, generate_batch, sample_proxies
from multisupport.numerics import sym_eig
from multisupport.theory import BlockMatrixSpec, block_matrix, expected_affinity


def test_variance_proxy_examples():
    assert np.array_equal(variance_proxy(np.ones((3, 4)), np.zeros(3)), np.zeros(4))
    assert variance_proxy([[2.0]], [6.0]).tolist() == [144.0]
    with pytest.raises(ValueError):
        variance_proxy(np.ones((3, 4)), np.ones(2))


def test_variance_proxy_row_permutation():
    rng = np.random.default_rng(0)
    phi, y = rng.standard_normal((5, 7)), rng.standard_normal(5)
    perm = rng.permutation(5)
    np.testing.assert_allclose(variance_proxy(phi[perm], y[perm]), variance_proxy(phi, y), rtol=1e-13)


def test_batched_proxies_match_single():
    rng = np.random.default_rng(1)
    phis, ys = rng.standard_normal((4, 3, 6)), rng.standard_normal((4, 3))
    batch = variance_proxies(phis, ys)
    for j in range(4):
        np.testing.assert_allclose(batch[j], variance_proxy(phis[j], ys[j]), rtol=1e-13)
    assert np.all(batch >= 0)
    with pytest.raises(ValueError):
        variance_proxies(phis, ys[:, :2])


def test_mean_proxy():
    one = np.array([[1.5, 2.5]])
    assert np.array_equal(mean_proxy(one), one[0])
    assert mean_proxy([[1.0, 0.0], [3.0, 2.0]]).tolist() == [2.0, 1.0]
    with pytest.raises(ValueError):
        mean_proxy(np.zeros((0, 3)))
    pb = proxy_batch(np.random.default_rng(0).random((10, 4)))
    np.testing.assert_allclose(pb.mean, pb.proxies.mean(axis=0), rtol=1e-12)


def test_mean_proxy_separates_union():
    p = ModelParams(d=20, k=2, l=2, m=2)
    prox, _, truth = sample_proxies(p, 100_000, seed=0)
    lam = mean_proxy(prox)
    on = sorted(truth.union())
    off = sorted(set(range(20)) - truth.union())
    assert lam[on].min() > lam[off].max()


def test_recover_union_examples():
    assert recover_union([5, 1, 4, 0.5, 3, 0.2], 3).tolist() == [0, 2, 4]
    assert recover_union([1, 1, 1, 1], 2).tolist() == [0, 1]
    assert recover_union([3, 1, 2], 3).tolist() == [0, 1, 2]
    for bad in (0, 4):
        with pytest.raises(ValueError):
            recover_union([3, 1, 2], bad)


def test_estimate_union_size_examples():
    assert estimate_union_size([10, 9, 8, 0.1, 0.09]) == 3
    assert estimate_union_size([2.0**-i for i in range(8)]) == 1
    assert estimate_union_size([5, 5, 5, 5]) == 1
    # order of the input does not matter
    assert estimate_union_size([0.1, 8, 10, 0.09, 9]) == 3


@given(st.lists(st.floats(0.01, 1e6), min_size=2, max_size=30))
@settings(max_examples=100, deadline=None)
def test_estimate_union_size_exhaustive(values):
    lam = sorted(values, reverse=True)
    ratios = [lam[i] / (lam[i + 1] + 1e-12) for i in range(len(lam) - 1)]
    best = max(ratios)
    assert estimate_union_size(values) == ratios.index(best) + 1


def test_two_largest_drops():
    lam = [50, 48, 10, 9.5, 9, 0.1, 0.1]
    assert two_largest_drops(lam) == (2, 5)


def test_affinity_examples():
    aff = affinity_matrix(np.array([[1.0, 9.0, 2.0]]), [2, 0])
    np.testing.assert_allclose(aff.t, [[1, 2], [2, 4]])
    assert aff.gmap.tolist() == [0, 2]
    with pytest.raises(ValueError):
        affinity_matrix(np.ones((2, 3)), [])


@given(st.integers(1, 50), st.integers(0, 1000))
@settings(max_examples=40, deadline=None)
def test_affinity_gram_structure(n, seed):
    prox = np.random.default_rng(seed).random((n, 6)) ** 2
    aff = affinity_matrix(prox, [0, 2, 3, 5])
    assert np.array_equal(aff.t, aff.t.T)
    assert np.all(aff.t >= 0)
    assert np.all(np.diff(aff.gmap) > 0)
    np.testing.assert_allclose(aff.t, prox[:, [0, 2, 3, 5]].T @ prox[:, [0, 2, 3, 5]] / n, rtol=1e-12)


def test_sample_order_invariance():
    prox, _, truth = sample_proxies(ModelParams(d=30, k=4, l=2, m=3), 9000, seed=2)
    perm = np.random.default_rng(0).permutation(9000)
    lam1, lam2 = mean_proxy(prox), mean_proxy(prox[perm])
    assert np.max(np.abs(lam1 - lam2) / np.abs(lam1)) <= 1e-10
    u = sorted(truth.union())
    t1, t2 = affinity_matrix(prox, u).t, affinity_matrix(prox[perm], u).t
    assert np.max(np.abs(t1 - t2) / np.abs(t1)) <= 1e-10


def test_affinity_matches_theory_on_true_union():
    p = ModelParams(d=6, k=3, l=2, m=2)
    prox, _, truth = sample_proxies(p, 200_000, seed=11)
    t = affinity_matrix(prox, sorted(truth.union())).t
    spec = expected_affinity(p)
    gmap = sorted(truth.union())
    block = {c: b for b, part in enumerate(truth) for c in part}
    on, off = [], []
    for i, j in itertools.combinations(range(6), 2):
        (on if block[gmap[i]] == block[gmap[j]] else off).append((i, j))
    a = prox[:, gmap]
    for pairs, target in ((on, spec.mu_on), (off, spec.mu_off)):
        per = np.mean([a[:, i] * a[:, j] for i, j in pairs], axis=0)
        se = per.std(ddof=1) / np.sqrt(per.size)
        assert abs(np.mean([t[i, j] for i, j in pairs]) - target) <= 3 * se


def block_aff(spec, perm=None):
    t = block_matrix(spec)
    n = t.shape[0]
    perm = np.arange(n) if perm is None else perm
    return AffinityMatrix(t=t[np.ix_(perm, perm)], gmap=np.arange(n)), perm


def test_cluster_single_group():
    aff, _ = block_aff(BlockMatrixSpec(3, 2, 1, 2, 2))
    sup, info = cluster_supports(aff, 1)
    assert sup == SupportTuple([range(4)])
    assert info["nonempty"] == 1


def test_cluster_permuted_blocks():
    spec = BlockMatrixSpec(mu0=3, mu_on=2, mu_off=1, k=2, l=2)
    perm = np.array([2, 0, 3, 1])
    aff, _ = block_aff(spec, perm)
    sup, _ = cluster_supports(aff, 2)
    # row r of the permuted matrix is original coordinate perm[r]
    inv = {r: int(perm[r]) // 2 for r in range(4)}
    expected = [[r for r in range(4) if inv[r] == b] for b in range(2)]
    assert match_distance(sup, expected).distance == 0


def test_cluster_sign_flip_invariance():
    spec = BlockMatrixSpec(mu0=5, mu_on=2, mu_off=0.5, k=3, l=3)
    aff, _ = block_aff(spec, np.random.default_rng(0).permutation(9))
    eig = sym_eig(aff.t)
    base, _ = cluster_supports(aff, 3, eig=eig)
    flipped = type(eig)(eig.values, eig.vectors * np.array([1, -1, -1] + [1] * 6), eig.sweeps)
    again, _ = cluster_supports(aff, 3, eig=flipped)
    assert base == again


def brute_force_partition(rows, k, l):
    """Best split of the rows into l groups of size k by within-group scatter."""
    n = rows.shape[0]
    best, best_cost = None, np.inf
    for labels in itertools.product(range(l), repeat=n):
        if labels[0] != 0 or any(labels.count(g) != k for g in range(l)):
            continue
        lab = np.array(labels)
        cost = sum(((rows[lab == g] - rows[lab == g].mean(axis=0)) ** 2).sum() for g in range(l))
        if cost < best_cost - 1e-12:
            best, best_cost = lab, cost
    return SupportTuple([np.flatnonzero(best == g) for g in range(l)])


@pytest.mark.parametrize("k,l", [(2, 2), (3, 2), (2, 3), (1, 3)])
def test_cluster_matches_brute_force(k, l):
    rng = np.random.default_rng(k * 10 + l)
    for _ in range(5):
        mu_off = rng.uniform(0, 1)
        spec = BlockMatrixSpec(mu0=rng.uniform(3, 5), mu_on=mu_off + rng.uniform(0.2, 2), mu_off=mu_off, k=k, l=l)
        aff, _ = block_aff(spec, rng.permutation(k * l))
        got, _ = cluster_supports(aff, l)
        rows = sym_eig(aff.t).vectors[:, :l]
        assert match_distance(got, brute_force_partition(rows, k, l)).distance == 0


@pytest.mark.parametrize("k,l", [(2, 2), (3, 4), (5, 3)])
def test_eigenrow_structure(k, l):
    spec = expected_affinity(ModelParams(d=k * l, k=k, l=l, m=3))
    v = sym_eig(block_matrix(spec)).vectors[:, :l]
    for b in range(l):
        blk = v[b * k:(b + 1) * k]
        assert np.max(np.abs(blk - blk[0])) <= 1e-8
    for a, b in itertools.combinations(range(l), 2):
        assert abs(np.sum((v[a * k] - v[b * k]) ** 2) - 2 / k) <= 1e-8


def test_recover_end_to_end_and_partition():
    p = ModelParams(d=40, k=4, l=2, m=3)
    ds = generate_batch(p, 20_000, seed=3)
    res = recover(ds, 4, 2)
    assert match_distance(ds.truth, res.supports_est).distance == 0
    assert res.supports_est.is_disjoint()
    assert res.supports_est.union() == frozenset(res.union_est.tolist())
    assert res.union_est.size == 8
    assert np.all(np.diff(res.eigenvalues) <= 1e-12 * res.eigenvalues[0])
    assert res.diagnostics["restarts"] == 10


def test_recover_single_support():
    p = ModelParams(d=30, k=5, l=1, m=3)
    ds = generate_batch(p, 3000, seed=1)
    res = recover(ds, 5, 1)
    assert res.supports_est[0] == frozenset(res.union_est.tolist())


def test_recover_scale_invariance():
    p = ModelParams(d=30, k=3, l=2, m=3)
    ds = generate_batch(p, 4000, seed=5)
    scaled = Dataset(phis=ds.phis, ys=2 * ds.ys, params=p)
    a, b = recover(ds, 3, 2), recover(scaled, 3, 2)
    assert np.array_equal(a.union_est, b.union_est)
    assert a.supports_est == b.supports_est


def test_recover_auto_union_size():
    p = ModelParams(d=60, k=4, l=2, m=3)
    prox, _, truth = sample_proxies(p, 50_000, seed=4)
    res = recover_from_proxies(prox, 4, 2, RecoveryOptions(union_size="auto"))
    assert res.diagnostics["union_size"] == 8
    assert match_distance(truth, res.supports_est).distance == 0


def test_recover_rejects_oversized():
    prox = np.ones((5, 4))
    with pytest.raises(ValueError):
        recover_from_proxies(prox, 3, 2)


def test_overlap_split_limits():
    p = ModelParams(d=30, k=4, l=2, m=3)
    ds = generate_batch(p, 20_000, seed=7)
    s1, s2 = recover_overlapping_two(ds, 4, tau=1e-9)
    base = recover(ds, 4, 2).supports_est
    assert match_distance(base, [s1, s2]).distance == 0
    s1, s2 = recover_overlapping_two(ds, 4, tau=1.0)
    assert s1 == s2 == set(recover(ds, 4, 2).union_est.tolist())


def test_overlap_rejects_bad_input():
    ds = generate_batch(ModelParams(d=12, k=2, l=3, m=2), 10, seed=0)
    with pytest.raises(ValueError):
        recover_overlapping_two(ds, 2, 0.1)
    aff = AffinityMatrix(t=np.eye(3), gmap=np.arange(3))
    with pytest.raises(ValueError):
        split_second_eigenvector(aff, 0.0)


def overlap_proxies(seed, n, d=60, k=6, m=4, shared=2):
    """Proxies for two size-k supports sharing ``shared`` coordinates (Gaussian)."""
    rng = np.random.default_rng(seed)
    coords = rng.permutation(d)[:2 * k - shared]
    s1, s2 = coords[:k], coords[k - shared:]
    labels = rng.integers(0, 2, n)
    cols = np.where(labels[:, None] == 0, s1, s2)
    prox = np.empty((n, d))
    for start in range(0, n, 4096):
        stop = min(start + 4096, n)
        phis = rng.standard_normal((stop - start, m, d)) / np.sqrt(m)
        x = np.zeros((stop - start, d))
        np.put_along_axis(x, cols[start:stop], rng.standard_normal((stop - start, k)), axis=1)
        ys = np.einsum("nmd,nd->nm", phis, x)
        prox[start:stop] = np.einsum("nmd,nm->nd", phis, ys) ** 2
    return prox, set(s1.tolist()), set(s2.tolist())


@pytest.mark.parametrize("tau", [0.1, 0.12, 0.15])
def test_overlap_recovers_intersection(tau):
    hits = 0
    for seed in range(10):
        prox, s1, s2 = overlap_proxies(seed, 40_000)
        e1, e2 = recover_overlapping_two(prox, 6, tau=tau, union_size=10)
        hits += (s1 & s2) <= (e1 & e2)
    assert hits >= 8


def test_overlap_with_full_diagonal_misses_intersection():
    prox, s1, s2 = overlap_proxies(0, 40_000)
    e1, e2 = recover_overlapping_two(prox, 6, tau=0.15, union_size=10, drop_diagonal=False)
    assert not (s1 & s2) <= (e1 & e2)
