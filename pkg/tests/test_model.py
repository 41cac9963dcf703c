import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from multisupport.estimator import variance_proxies
from multisupport.model import (SAMPLE_BLOCK, Dataset, Ensemble, ModelParams, SupportTuple, draw_measurement_matrix,
                                draw_sample, generate_batch, make_supports, sample_proxies)


def within_3se(samples, target):
    samples = np.asarray(samples, dtype=np.float64)
    se = samples.std(ddof=1) / np.sqrt(samples.size)
    return abs(samples.mean() - target) <= 3 * se


def test_params_validation():
    with pytest.raises(ValueError):
        ModelParams(d=5, k=3, l=2, m=2)
    with pytest.raises(ValueError):
        ModelParams(d=10, k=3, l=2, m=2, lambda0=0.0)
    with pytest.raises(ValueError):
        ModelParams(d=10, k=0, l=2, m=2)
    with pytest.raises(ValueError):
        ModelParams(d=10, k=2, l=2, m=2, sample_dist="cauchy")


def test_rho_by_ensemble():
    assert ModelParams(d=4, k=2, l=2, m=2, lambda0=2.0).rho == 12.0
    assert ModelParams(d=4, k=2, l=2, m=2, lambda0=2.0, sample_dist="rademacher").rho == 4.0


def test_make_supports_pigeonhole():
    p = ModelParams(d=4, k=2, l=2, m=2)
    sup = make_supports(p, np.random.default_rng(3))
    assert sup.union() == frozenset(range(4))
    assert sup.is_disjoint()


def test_make_supports_size_and_determinism():
    p = ModelParams(d=100, k=10, l=2, m=4)
    a = make_supports(p, np.random.default_rng(7))
    b = make_supports(p, np.random.default_rng(7))
    assert a == b
    assert [len(s) for s in a] == [10, 10]
    assert a.is_disjoint()
    a.validate(100, k=10)


@given(st.integers(1, 6), st.integers(1, 5), st.integers(0, 10), st.integers(0, 2**31))
@settings(max_examples=60, deadline=None)
def test_supports_always_disjoint(k, l, extra, seed):
    p = ModelParams(d=k * l + extra, k=k, l=l, m=1)
    sup = make_supports(p, np.random.default_rng(seed))
    assert len(sup) == l
    assert sup.is_disjoint()
    assert len(sup.union()) == k * l
    assert all(0 <= c < p.d for s in sup for c in s)


def test_support_tuple_validation():
    with pytest.raises(ValueError):
        SupportTuple([[0, 1], [1, 2]]).validate(5)
    with pytest.raises(ValueError):
        SupportTuple([[0, 7]]).validate(5)
    with pytest.raises(ValueError):
        SupportTuple([[0, 1], [2]]).validate(5, k=2)
    SupportTuple([[0, 1], [1, 2]]).validate(5, disjoint=False)


def test_draw_sample_support():
    p = ModelParams(d=30, k=4, l=3, m=2)
    rng = np.random.default_rng(0)
    sup = make_supports(p, rng)
    for _ in range(50):
        label, x = draw_sample(p, sup, rng)
        nz = set(np.flatnonzero(x).tolist())
        assert nz <= set(sup[label])
        assert len(nz) <= 4


def test_draw_sample_gaussian_moments():
    p = ModelParams(d=1, k=1, l=1, m=1)
    rng = np.random.default_rng(11)
    sup = SupportTuple([[0]])
    xs = np.array([draw_sample(p, sup, rng)[1][0] for _ in range(20_000)])
    assert within_3se(xs**2, 1.0)
    assert within_3se(xs**4, 3.0)


def test_million_gaussian_sample_moments():
    p = ModelParams(d=10, k=10, l=1, m=1)
    xs = generate_batch(p, 100_000, seed=2, retain_x=True).xs.ravel()
    assert xs.size == 10**6
    assert within_3se(xs**2, 1.0)
    assert within_3se(xs**4, 3.0)


def test_rademacher_samples_are_signs():
    p = ModelParams(d=6, k=3, l=2, m=2, lambda0=4.0, sample_dist="rademacher")
    ds = generate_batch(p, 100, seed=0, retain_x=True)
    vals = ds.xs[ds.xs != 0]
    assert set(np.unique(vals).tolist()) <= {-2.0, 2.0}


def test_label_frequencies():
    p = ModelParams(d=9, k=3, l=3, m=1)
    labels = generate_batch(p, 100_000, seed=4).labels
    for c in range(3):
        assert within_3se((labels == c).astype(float), 1 / 3)


def test_rademacher_matrix_entries():
    p = ModelParams(d=7, k=1, l=1, m=4, matrix_dist="rademacher")
    phi = draw_measurement_matrix(p, np.random.default_rng(0))
    assert phi.shape == (4, 7)
    assert set(np.unique(phi).tolist()) == {-0.5, 0.5}


@pytest.mark.parametrize("m", [2, 4])
def test_gaussian_matrix_moments(m):
    p = ModelParams(d=1000, k=1, l=1, m=m)
    rng = np.random.default_rng(m)
    entries = np.concatenate([draw_measurement_matrix(p, rng).ravel() for _ in range(10**6 // (m * 1000))])
    c = (1.0, 3.0, 15.0, 105.0)
    for q in range(1, 5):
        assert within_3se(entries ** (2 * q), c[q - 1] / m**q), q


def test_rademacher_matrix_moments_exact():
    p = ModelParams(d=1000, k=1, l=1, m=8, matrix_dist="rademacher")
    e = draw_measurement_matrix(p, np.random.default_rng(1)).ravel()
    for q in range(1, 5):
        np.testing.assert_allclose(e ** (2 * q), 1.0 / 8**q)


def test_generate_batch_rejects_empty():
    with pytest.raises(ValueError):
        generate_batch(ModelParams(d=4, k=2, l=2, m=2), 0, seed=0)


def test_generate_batch_measurements_exact():
    p = ModelParams(d=20, k=3, l=2, m=5)
    ds = generate_batch(p, 1, seed=9, retain_x=True)
    assert ds.n == 1
    cols = sorted(ds.truth[ds.labels[0]])
    assert np.array_equal(ds.ys[0], ds.phis[0][:, cols] @ ds.xs[0, cols])
    big = generate_batch(p, 3000, seed=9, retain_x=True)
    # a full product also sums the zero columns, which BLAS may round differently
    np.testing.assert_allclose(big.ys, np.einsum("nmd,nd->nm", big.phis, big.xs), rtol=1e-12, atol=1e-12)


def test_generate_batch_labels_match_support():
    p = ModelParams(d=40, k=5, l=3, m=2)
    ds = generate_batch(p, 500, seed=1, retain_x=True)
    for x, lab in zip(ds.xs, ds.labels):
        assert set(np.flatnonzero(x).tolist()) <= set(ds.truth[lab])


def test_stratified_counts():
    p = ModelParams(d=10, k=2, l=2, m=2)
    ds = generate_batch(p, 100, seed=0, stratified=True)
    assert np.bincount(ds.labels).tolist() == [50, 50]


def test_same_seed_bitwise_identical():
    p = ModelParams(d=15, k=3, l=2, m=3)
    a = generate_batch(p, 2500, seed=42)
    b = generate_batch(p, 2500, seed=42)
    assert a.ys.tobytes() == b.ys.tobytes()
    assert a.truth == b.truth
    c = generate_batch(p, 2500, seed=43)
    assert a.ys.tobytes() != c.ys.tobytes()


def test_complete_blocks_do_not_depend_on_n():
    p = ModelParams(d=15, k=3, l=2, m=3)
    a = generate_batch(p, 3000, seed=8)
    b = generate_batch(p, 1100, seed=8)
    assert np.array_equal(a.ys[:SAMPLE_BLOCK], b.ys[:SAMPLE_BLOCK])


def test_full_sampler_matches_dataset_proxies():
    p = ModelParams(d=12, k=3, l=2, m=3)
    ds = generate_batch(p, 2100, seed=6)
    prox, labels, truth = sample_proxies(p, 2100, seed=6)
    assert np.array_equal(prox, variance_proxies(ds.phis, ds.ys))
    assert np.array_equal(labels, ds.labels)
    assert truth == ds.truth


def test_marginal_sampler_law():
    # the off-support proxies are (N(0, |y|^2/m))^2, so their mean equals the
    # full sampler's off-support mean, k*lambda0/m = 1
    p = ModelParams(d=12, k=4, l=2, m=4)
    full, _, truth = sample_proxies(p, 60_000, seed=3)
    marg, _, truth2 = sample_proxies(p, 60_000, seed=3, sampler="marginal")
    assert truth == truth2
    off = sorted(set(range(12)) - truth.union())
    for arr in (full, marg):
        assert within_3se(arr[:, off].mean(axis=1), 1.0)
    on = sorted(truth.union())
    a, b = full[:, on].mean(axis=1), marg[:, on].mean(axis=1)
    se = np.hypot(a.std() / np.sqrt(a.size), b.std() / np.sqrt(b.size))
    assert abs(a.mean() - b.mean()) <= 3 * se


def test_marginal_sampler_requires_gaussian_matrices():
    p = ModelParams(d=6, k=2, l=2, m=2, matrix_dist="rademacher")
    with pytest.raises(ValueError):
        sample_proxies(p, 10, seed=0, sampler="marginal")


def test_dataset_shape_checks():
    p = ModelParams(d=4, k=2, l=2, m=2)
    with pytest.raises(ValueError):
        Dataset(phis=np.zeros((3, 2, 4)), ys=np.zeros((3, 3)), params=p)
    with pytest.raises(ValueError):
        Dataset(phis=np.zeros((3, 2, 5)), ys=np.zeros((3, 2)), params=p)


def test_ensemble_parse():
    assert Ensemble.parse("Gaussian") is Ensemble.GAUSSIAN
    with pytest.raises(ValueError):
        Ensemble.parse("uniform")
