"""
Closed forms for the moments, the expected affinity matrix and its spectrum.

Every closed form here has a Monte Carlo counterpart in the same module
(``moment_monte_carlo``, ``gamma_monte_carlo``, ``monte_carlo_affinity``)
used to check it.

Conventions
-----------
Measurement columns are independent vectors in R^m with i.i.d. entries of
variance ``1/m`` and even moments ``E[phi^(2q)] = c_q / m^q``.  All sums over
``i != j`` run over *ordered* pairs.  With ``alpha_u = Phi_S^T phi_u`` the
conditional second moment of the quadratic form is

    E[(x^T a b^T x)^2] = rho sum a_i^2 b_i^2
                         + lambda0^2 sum_{i != j} (a_i^2 b_j^2 + 2 a_i b_i a_j b_j)

so every off-diagonal entry of E[T] is ``rho*g1 + lambda0^2*(g2 + 2*g3)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .model import Ensemble, ModelParams, SupportTuple, sample_proxies


@dataclass(frozen=True)
class EnsembleMoments:
    c2: float
    c3: float
    c4: float


GAUSSIAN_MOMENTS = EnsembleMoments(3.0, 15.0, 105.0)
RADEMACHER_MOMENTS = EnsembleMoments(1.0, 1.0, 1.0)


def ensemble_moments(ens) -> EnsembleMoments:
    if isinstance(ens, EnsembleMoments):
        return ens
    return GAUSSIAN_MOMENTS if Ensemble.parse(ens) is Ensemble.GAUSSIAN else RADEMACHER_MOMENTS


MOMENT_NAMES = ("i", "ii", "iii", "iv", "v", "vi", "vii", "viii", "ix", "x")

MOMENT_DESCRIPTIONS = {
    "i": "E|Z|^4",
    "ii": "E|Z|^6",
    "iii": "E|Z|^8",
    "iv": "E(X'Y)^4",
    "v": "E|Z|^4 (Z'W)^2",
    "vi": "E(X'Z)^2 (X'W)^2",
    "vii": "E|Z|^2 |W|^2 (Z'W)^2",
    "viii": "E|Z|^2 (W'Z)(X'Z)(X'W)",
    "ix": "E(Z'X)(Z'Y)(W'X)(W'Y)",
    "x": "E(X'Y)^2",
}


def _norm4(m, e):
    return 1 + (e.c2 - 1) / m


def _norm6(m, e):
    return 1 + 3 * (e.c2 - 1) / m + (e.c3 - 3 * e.c2 + 2) / m**2


def _norm8(m, e):
    c2, c3, c4 = e.c2, e.c3, e.c4
    return (1 + 6 * (c2 - 1) / m
            + (11 - 18 * c2 + 3 * c2**2 + 4 * c3) / m**2
            + (c4 - 4 * c3 - 3 * c2**2 + 12 * c2 - 6) / m**3)


def _inner4(m, e):
    return 3 / m**2 + (e.c2**2 - 3) / m**3


def moment_value(name: str, m: int, ens) -> float:
    """Closed-form moment of norms and inner products of independent columns.

    ``name`` is one of ``MOMENT_NAMES``; see ``MOMENT_DESCRIPTIONS`` for the
    quantity each one denotes.
    """
    if m < 1:
        raise ValueError("m must be at least 1")
    e = ensemble_moments(ens)
    a = _norm4(m, e)
    table = {
        "i": lambda: a,
        "ii": lambda: _norm6(m, e),
        "iii": lambda: _norm8(m, e),
        "iv": lambda: _inner4(m, e),
        "v": lambda: _norm6(m, e) / m,
        "vi": lambda: a / m**2,
        "vii": lambda: a * a / m,
        "viii": lambda: a / m**2,
        "ix": lambda: 1 / m**3,
        "x": lambda: 1 / m,
    }
    if name not in table:
        raise ValueError(f"unknown moment {name!r}; expected one of {MOMENT_NAMES}")
    return float(table[name]())


def _draw_columns(rng, ens, shape, m):
    if Ensemble.parse(ens) is Ensemble.GAUSSIAN:
        return rng.standard_normal(shape) / math.sqrt(m)
    return (2.0 * rng.integers(0, 2, size=shape, dtype=np.int8) - 1.0) / math.sqrt(m)


def moment_monte_carlo(name: str, m: int, ens, draws: int, seed: int = 0, chunk: int = 200_000):
    """Sample mean and standard error of the quantity behind ``moment_value``."""
    if name not in MOMENT_NAMES:
        raise ValueError(f"unknown moment {name!r}")
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(MOMENT_NAMES.index(name),)))
    total = total_sq = 0.0
    done = 0
    while done < draws:
        b = min(chunk, draws - done)
        x, y, z, w = (_draw_columns(rng, ens, (b, m), m) for _ in range(4))
        zz = np.einsum("ij,ij->i", z, z)
        ww = np.einsum("ij,ij->i", w, w)
        xy = np.einsum("ij,ij->i", x, y)
        zw = np.einsum("ij,ij->i", z, w)
        xz = np.einsum("ij,ij->i", x, z)
        xw = np.einsum("ij,ij->i", x, w)
        zy = np.einsum("ij,ij->i", z, y)
        wy = np.einsum("ij,ij->i", w, y)
        val = {
            "i": zz**2,
            "ii": zz**3,
            "iii": zz**4,
            "iv": xy**4,
            "v": zz**2 * zw**2,
            "vi": xz**2 * xw**2,
            "vii": zz * ww * zw**2,
            "viii": zz * zw * xz * xw,
            "ix": xz * zy * xw * wy,
            "x": xy**2,
        }[name]
        total += float(val.sum())
        total_sq += float((val * val).sum())
        done += b
    mean = total / draws
    var = max(total_sq / draws - mean * mean, 0.0)
    return mean, math.sqrt(var / max(draws - 1, 1))


@dataclass(frozen=True)
class GammaTerms:
    """Expected sums over the sample's support ``S`` for a coordinate pair ``(u, v)``.

    Suffix ``s``: both ``u, v`` in ``S``; ``sd``: exactly one; ``d``: neither.
    ``g1 = E sum_i a_ui^2 a_vi^2``, ``g2 = E sum_{i!=j} a_ui^2 a_vj^2``,
    ``g3 = E sum_{i!=j} a_ui a_vi a_uj a_vj`` with ``a_ui = phi_u^T phi_i``.
    """

    g1s: float
    g1sd: float
    g1d: float
    g2s: float
    g2sd: float
    g2d: float
    g3s: float
    g3sd: float
    g3d: float


def gamma_terms(k: int, m: int, ens) -> GammaTerms:
    if k < 1 or m < 1:
        raise ValueError("k and m must be positive")
    e = ensemble_moments(ens)
    a, b, q4 = _norm4(m, e), _norm6(m, e), _inner4(m, e)
    return GammaTerms(
        g1s=2 * b / m + (k - 2) * a / m**2,
        g1sd=b / m + (k - 1) * a / m**2,
        g1d=k * a / m**2,
        g2s=a * a + q4 + 2 * (k - 2) * a / m + 2 * (k - 2) * a / m**2 + (k - 2) * (k - 3) / m**2,
        g2sd=(k - 1) * a / m + (k - 1) * a / m**2 + (k - 1) * (k - 2) / m**2,
        g2d=k * (k - 1) / m**2,
        g3s=2 * a * a / m + 4 * (k - 2) * a / m**2 + (k - 2) * (k - 3) / m**3,
        g3sd=2 * (k - 1) * a / m**2 + (k - 1) * (k - 2) / m**3,
        g3d=k * (k - 1) / m**3,
    )


def gamma_monte_carlo(k: int, m: int, ens, draws: int, seed: int = 0, chunk: int = 50_000) -> dict:
    """Monte Carlo means and standard errors of the nine gamma expectations.

    Needs ``k >= 2`` so that a pair inside the support exists.
    """
    if k < 2:
        raise ValueError("k must be at least 2")
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    sums = {}
    done = 0
    while done < draws:
        b = min(chunk, draws - done)
        cols = _draw_columns(rng, ens, (b, m, k + 2), m)
        phi_s = cols[:, :, :k]
        pairs = {"s": (0, 1), "sd": (0, k), "d": (k, k + 1)}
        for case, (u, v) in pairs.items():
            au = np.einsum("bmi,bm->bi", phi_s, cols[:, :, u])
            av = np.einsum("bmi,bm->bi", phi_s, cols[:, :, v])
            diag = np.sum(au**2 * av**2, axis=1)
            vals = {
                "g1": diag,
                "g2": np.sum(au**2, axis=1) * np.sum(av**2, axis=1) - diag,
                "g3": np.sum(au * av, axis=1) ** 2 - diag,
            }
            for g, val in vals.items():
                key = g + case
                s, s2 = sums.get(key, (0.0, 0.0))
                sums[key] = (s + float(val.sum()), s2 + float((val * val).sum()))
        done += b
    out = {}
    for key, (s, s2) in sums.items():
        mean = s / draws
        out[key] = (mean, math.sqrt(max(s2 / draws - mean * mean, 0.0) / (draws - 1)))
    return out


@dataclass(frozen=True)
class BlockMatrixSpec:
    """Entries of the expected affinity matrix.

    ``mu0`` on the diagonal, ``mu_on`` within a support block, ``mu_off``
    across blocks.  ``mu0_bound`` is the leading-term diagonal bound taken with
    unit constants; it is reported for reference only.
    """

    mu0: float
    mu_on: float
    mu_off: float
    k: int
    l: int
    mu0_bound: Optional[float] = None


def _pair_value(rho, lam2, g1, g2, g3):
    return rho * g1 + lam2 * (g2 + 2 * g3)


def expected_diagonal(params: ModelParams) -> float:
    """Exact ``E[T_uu]`` for ``u`` in the union."""
    k, l, m = params.k, params.l, params.m
    e = ensemble_moments(params.matrix_dist)
    rho, lam2 = params.rho, params.lambda0**2
    a, b, c, q4 = _norm4(m, e), _norm6(m, e), _norm8(m, e), _inner4(m, e)
    # E (alpha^T x)^4 = rho sum alpha_i^4 + 3 lambda0^2 sum_{i!=j} alpha_i^2 alpha_j^2
    own = rho * (c + (k - 1) * q4) + 3 * lam2 * (2 * (k - 1) * b / m + (k - 1) * (k - 2) * a / m**2)
    other = rho * k * q4 + 3 * lam2 * k * (k - 1) * a / m**2
    return own / l + (l - 1) / l * other


def diagonal_bound(params: ModelParams) -> float:
    """Leading-term diagonal bound with every absolute constant set to one."""
    k, l, m = params.k, params.l, params.m
    rho, lam2 = params.rho, params.lambda0**2
    own = rho * (1 + (k - 1) / m**2) + lam2 * ((k - 1) / m + (k - 1) * (k - 2) / m**2)
    other = rho * k / m**2 + lam2 * k * (k - 1) / m**2
    return own / l + (l - 1) / l * other


def expected_affinity(params: ModelParams) -> BlockMatrixSpec:
    """Block entries of ``E[T]`` for the true union, blocks ordered by support."""
    k, l, m = params.k, params.l, params.m
    g = gamma_terms(k, m, params.matrix_dist)
    rho, lam2 = params.rho, params.lambda0**2
    same = _pair_value(rho, lam2, g.g1s, g.g2s, g.g3s)
    one = _pair_value(rho, lam2, g.g1sd, g.g2sd, g.g3sd)
    none = _pair_value(rho, lam2, g.g1d, g.g2d, g.g3d)
    mu_on = same / l + (l - 1) / l * none
    mu_off = 2 / l * one + (l - 2) / l * none if l >= 2 else 0.0
    return BlockMatrixSpec(
        mu0=expected_diagonal(params), mu_on=mu_on, mu_off=mu_off, k=k, l=l,
        mu0_bound=diagonal_bound(params),
    )


def block_matrix(spec: BlockMatrixSpec) -> np.ndarray:
    """The explicit ``kl x kl`` matrix with contiguous blocks."""
    k, l = spec.k, spec.l
    blocks = np.repeat(np.arange(l), k)
    t = np.where(blocks[:, None] == blocks[None, :], spec.mu_on, spec.mu_off)
    np.fill_diagonal(t, spec.mu0)
    return t


@dataclass(frozen=True)
class BlockSpectrum:
    nu1: float
    nu_mid: float
    nu_low: float
    gap: float

    def multiplicities(self, k: int, l: int) -> tuple:
        return 1, l - 1, l * (k - 1)


def block_spectrum(spec: BlockMatrixSpec) -> BlockSpectrum:
    k, l = spec.k, spec.l
    mu0, s, d = spec.mu0, spec.mu_on, spec.mu_off
    return BlockSpectrum(
        nu1=mu0 + (k - 1) * s + k * (l - 1) * d,
        nu_mid=mu0 + (k - 1) * s - k * d,
        nu_low=mu0 - s,
        gap=k * (s - d),
    )


def spectrum_values(spec: BlockMatrixSpec) -> np.ndarray:
    """All ``kl`` eigenvalues, descending, from the closed form."""
    sp = block_spectrum(spec)
    k, l = spec.k, spec.l
    vals = [sp.nu1] + [sp.nu_mid] * (l - 1) + [sp.nu_low] * (l * (k - 1))
    return np.sort(np.array(vals))[::-1]


@dataclass(frozen=True)
class NormBound:
    bound: float
    exact: float


def operator_norm_bound(params: ModelParams) -> NormBound:
    """``rho k^2 l / m^2 + lambda0^2 k^3 l / m^2`` next to the exact top eigenvalue."""
    k, l, m = params.k, params.l, params.m
    bound = params.rho * k**2 * l / m**2 + params.lambda0**2 * k**3 * l / m**2
    return NormBound(bound=bound, exact=block_spectrum(expected_affinity(params)).nu1)


@dataclass(frozen=True)
class SampleComplexity:
    n_union: float
    n_cluster: float
    n_total: float
    eps: float


def sample_complexity_bounds(params: ModelParams, eps: float, delta: float) -> SampleComplexity:
    """Order-of-magnitude sample sizes with all absolute constants set to one.

    ``eps`` is clamped into ``[1/(kl), 1/l]``; below ``1/(kl)`` the target is
    already exact recovery.  When the union fills the whole space
    (``kl == d``) the union term is zero.
    """
    k, l, m, d = params.k, params.l, params.m, params.d
    if not eps > 0:
        raise ValueError("eps must be positive")
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    eps = min(max(eps, 1.0 / (k * l)), 1.0 / l)
    kl = k * l
    n_union = (kl / m) ** 2 * math.log(kl * (d - kl) / delta) if d > kl else 0.0
    n_cluster = (1 / eps) * (kl / m) ** 4 * math.log(k) ** 4 * math.log(kl) * math.log(1 / delta)
    return SampleComplexity(n_union, n_cluster, max(n_union, n_cluster), eps)


def quadratic_form_second_moment(a, b, lambda0: float, rho: float) -> float:
    """``E[(x^T a b^T x)^2]`` for independent zero-mean ``x_i`` with variance ``lambda0``, fourth moment ``rho``."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("a and b must be vectors of equal length")
    diag = float(np.sum(a**2 * b**2))
    cross_sq = float(np.sum(a**2) * np.sum(b**2)) - diag
    cross_mix = float(np.dot(a, b) ** 2) - diag
    return rho * diag + lambda0**2 * (cross_sq + 2 * cross_mix)


@dataclass
class MonteCarloAffinity:
    """Entrywise mean of ``T`` over fresh samples, with block averages.

    ``se`` holds entrywise standard errors; the block-averaged estimates
    carry grouped-jackknife standard errors.
    """

    matrix: np.ndarray
    se: np.ndarray
    mu0: float
    mu_on: float
    mu_off: float
    mu0_se: float
    mu_on_se: float
    mu_off_se: float
    n: int


def _jackknife(stat: np.ndarray, groups: int):
    n = stat.size
    g = max(2, min(groups, n))
    sums = np.array([s.sum() for s in np.array_split(stat, g)])
    sizes = np.array([s.size for s in np.array_split(stat, g)])
    total = sums.sum()
    loo = (total - sums) / (n - sizes)
    mean = total / n
    se = math.sqrt((g - 1) / g * float(np.sum((loo - loo.mean()) ** 2)))
    return float(mean), se


def monte_carlo_affinity(params: ModelParams, n: int, seed: int = 0, groups: int = 100,
                         stratified: bool = False) -> MonteCarloAffinity:
    """Estimate ``E[T]`` on the true union from ``n`` fresh samples.

    Only the union coordinates matter, so samples live in ``R^(kl)`` with
    support ``b`` occupying coordinates ``[b*k, (b+1)*k)``.
    """
    k, l = params.k, params.l
    reduced = ModelParams(d=k * l, k=k, l=l, m=params.m, lambda0=params.lambda0,
                          sample_dist=params.sample_dist, matrix_dist=params.matrix_dist)
    supports = SupportTuple([range(b * k, (b + 1) * k) for b in range(l)])
    a, _, _ = sample_proxies(reduced, n, seed, stratified=stratified, supports=supports)
    t = a.T @ a / n
    sq = a * a
    se = np.sqrt(np.maximum((sq.T @ sq) / n - t * t, 0.0) / max(n - 1, 1))
    blk = a.reshape(n, l, k)
    bsum = blk.sum(axis=2)
    bsq = (blk * blk).sum(axis=2)
    diag = bsq.sum(axis=1) / (k * l)
    on = (bsum**2 - bsq).sum(axis=1) / (l * k * (k - 1)) if k > 1 else np.zeros(n)
    tot = bsum.sum(axis=1)
    off = (tot**2 - (bsum**2).sum(axis=1)) / (k * k * l * (l - 1)) if l > 1 else np.zeros(n)
    mu0, mu0_se = _jackknife(diag, groups)
    mu_on, on_se = _jackknife(on, groups)
    mu_off, off_se = _jackknife(off, groups)
    return MonteCarloAffinity(t, se, mu0, mu_on, mu_off, mu0_se, on_se, off_se, n)
