"""
Generative model: disjoint supports, mixture samples and random measurement matrices.

Samples are drawn from a uniform mixture over ``l`` size-``k`` supports.  Each
sample ``x`` is zero off its support and has i.i.d. zero-mean entries with
variance ``lambda0`` on it.  Each sample is observed only through ``y = Phi x``
with a fresh ``m x d`` measurement matrix ``Phi``.

Randomness
----------
Every batch is a pure function of ``(params, n, seed)``.  Samples are generated
in fixed blocks of ``SAMPLE_BLOCK`` and block ``b`` draws from its own substream
``SeedSequence(seed, spawn_key=(2, b))``, so any block can be regenerated on
its own.  Supports use ``spawn_key=(0,)`` and stratified labels ``(1,)``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterator, Optional, Sequence

import numpy as np

SAMPLE_BLOCK = 1024


class Ensemble(str, enum.Enum):
    GAUSSIAN = "gaussian"
    RADEMACHER = "rademacher"

    @classmethod
    def parse(cls, value) -> "Ensemble":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValueError(f"unknown ensemble {value!r}; expected 'gaussian' or 'rademacher'") from None


@dataclass(frozen=True)
class ModelParams:
    """Problem dimensions and the two entry distributions.

    Parameters
    ----------
    d : int
        Ambient dimension.
    k : int
        Size of every support.
    l : int
        Number of supports.
    m : int
        Measurements per sample.
    lambda0 : float
        On-support variance of the sample entries.
    sample_dist, matrix_dist : Ensemble
        Law of the sample entries and of the measurement-matrix entries.
    """

    d: int
    k: int
    l: int
    m: int
    lambda0: float = 1.0
    sample_dist: Ensemble = Ensemble.GAUSSIAN
    matrix_dist: Ensemble = Ensemble.GAUSSIAN

    def __post_init__(self):
        object.__setattr__(self, "sample_dist", Ensemble.parse(self.sample_dist))
        object.__setattr__(self, "matrix_dist", Ensemble.parse(self.matrix_dist))
        for name in ("d", "k", "l", "m"):
            value = getattr(self, name)
            if int(value) != value or value < 1:
                raise ValueError(f"{name} must be a positive integer, got {value!r}")
        if self.k * self.l > self.d:
            raise ValueError(f"k*l = {self.k * self.l} exceeds d = {self.d}")
        if not self.lambda0 > 0:
            raise ValueError(f"lambda0 must be positive, got {self.lambda0!r}")

    @property
    def rho(self) -> float:
        """Fourth moment of an on-support sample entry."""
        if self.sample_dist is Ensemble.GAUSSIAN:
            return 3.0 * self.lambda0**2
        return self.lambda0**2


class SupportTuple:
    """An ordered tuple of coordinate sets.

    Disjointness and equal sizes are checked by :meth:`validate`, not by the
    constructor, so that overlapping tuples and partial estimates (with empty
    parts) can be represented as well.
    """

    __slots__ = ("_parts",)

    def __init__(self, parts: Sequence):
        self._parts = tuple(frozenset(int(i) for i in p) for p in parts)

    @property
    def parts(self) -> tuple:
        return self._parts

    def __len__(self):
        return len(self._parts)

    def __iter__(self):
        return iter(self._parts)

    def __getitem__(self, i):
        return self._parts[i]

    def __eq__(self, other):
        if isinstance(other, SupportTuple):
            return self._parts == other._parts
        return NotImplemented

    def __hash__(self):
        return hash(self._parts)

    def __repr__(self):
        inner = ", ".join("{" + ", ".join(map(str, sorted(p))) + "}" for p in self._parts)
        return f"SupportTuple([{inner}])"

    def union(self) -> frozenset:
        return frozenset().union(*self._parts)

    def sorted_lists(self) -> list:
        return [sorted(p) for p in self._parts]

    def is_disjoint(self) -> bool:
        return sum(len(p) for p in self._parts) == len(self.union())

    def validate(self, d: int, k: Optional[int] = None, disjoint: bool = True) -> "SupportTuple":
        for p in self._parts:
            if any(i < 0 or i >= d for i in p):
                raise ValueError(f"support element outside [0, {d})")
            if k is not None and len(p) != k:
                raise ValueError(f"support of size {len(p)}, expected {k}")
        if disjoint and not self.is_disjoint():
            raise ValueError("supports are not pairwise disjoint")
        return self

    def as_array(self) -> np.ndarray:
        """``l x k`` array of sorted members; requires equal part sizes."""
        return np.array(self.sorted_lists(), dtype=np.int64)


@dataclass
class Dataset:
    """``n`` measured samples plus optional ground truth.

    ``phis`` has shape ``(n, m, d)`` and ``ys`` shape ``(n, m)``.  ``xs`` is
    only filled when generation was asked to retain the samples.
    """

    phis: np.ndarray
    ys: np.ndarray
    params: ModelParams
    labels: Optional[np.ndarray] = None
    truth: Optional[SupportTuple] = None
    xs: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        self.phis = np.asarray(self.phis, dtype=np.float64)
        self.ys = np.asarray(self.ys, dtype=np.float64)
        if self.phis.ndim != 3 or self.ys.ndim != 2:
            raise ValueError("phis must be (n, m, d) and ys (n, m)")
        n, m, d = self.phis.shape
        if self.ys.shape != (n, m):
            raise ValueError(f"ys has shape {self.ys.shape}, expected {(n, m)}")
        if (m, d) != (self.params.m, self.params.d):
            raise ValueError("phis shape disagrees with params (m, d)")
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=np.int64)
            if self.labels.shape != (n,):
                raise ValueError("labels must have one entry per sample")

    @property
    def n(self) -> int:
        return self.phis.shape[0]

    def subset(self, start: int, stop: int) -> "Dataset":
        return Dataset(
            phis=self.phis[start:stop],
            ys=self.ys[start:stop],
            params=self.params,
            labels=None if self.labels is None else self.labels[start:stop],
            truth=self.truth,
            xs=None if self.xs is None else self.xs[start:stop],
        )


def _substream(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=tuple(key)))


def _draw_entries(rng: np.random.Generator, dist: Ensemble, shape, scale: float) -> np.ndarray:
    if dist is Ensemble.GAUSSIAN:
        return rng.standard_normal(shape) * scale
    signs = rng.integers(0, 2, size=shape, dtype=np.int8).astype(np.float64)
    return (2.0 * signs - 1.0) * scale


def make_supports(params: ModelParams, rng: np.random.Generator) -> SupportTuple:
    """Draw ``l`` disjoint, uniformly random size-``k`` subsets of ``[d]``."""
    if params.k * params.l > params.d:
        raise ValueError("k*l exceeds d")
    picked = rng.permutation(params.d)[: params.k * params.l]
    return SupportTuple(picked.reshape(params.l, params.k))


def draw_sample(params: ModelParams, supports: SupportTuple, rng: np.random.Generator):
    """One mixture draw: returns ``(label, x)``."""
    label = int(rng.integers(0, params.l))
    x = np.zeros(params.d)
    idx = np.array(sorted(supports[label]), dtype=np.int64)
    x[idx] = _draw_entries(rng, params.sample_dist, idx.size, math.sqrt(params.lambda0))
    return label, x


def draw_measurement_matrix(params: ModelParams, rng: np.random.Generator) -> np.ndarray:
    """An ``m x d`` matrix with i.i.d. entries of variance ``1/m``."""
    return _draw_entries(rng, params.matrix_dist, (params.m, params.d), 1.0 / math.sqrt(params.m))


def _labels(params: ModelParams, n: int, seed: int, stratified: bool) -> Optional[np.ndarray]:
    if not stratified:
        return None
    base = np.arange(n) % params.l
    return _substream(seed, 1).permutation(base)


def _block_ranges(n: int):
    for b, start in enumerate(range(0, n, SAMPLE_BLOCK)):
        yield b, start, min(start + SAMPLE_BLOCK, n)


def _block_core(params, seed, b, size, strat_labels):
    """Labels, on-support values and the block's generator, in draw order."""
    rng = _substream(seed, 2, b)
    if strat_labels is None:
        labels = rng.integers(0, params.l, size=size)
    else:
        labels = strat_labels
    return rng, labels


def iter_blocks(params: ModelParams, supports: SupportTuple, n: int, seed: int,
                stratified: bool = False) -> Iterator[tuple]:
    """Yield ``(start, labels, phis, ys, xvals, cols)`` per sample block.

    ``xvals[j]`` are the on-support values of sample ``j`` placed at columns
    ``cols[j]``.
    """
    sup = supports.as_array()
    strat = _labels(params, n, seed, stratified)
    scale_x = math.sqrt(params.lambda0)
    scale_phi = 1.0 / math.sqrt(params.m)
    for b, start, stop in _block_ranges(n):
        size = stop - start
        rng, labels = _block_core(params, seed, b, size,
                                  None if strat is None else strat[start:stop])
        phis = _draw_entries(rng, params.matrix_dist, (size, params.m, params.d), scale_phi)
        xvals = _draw_entries(rng, params.sample_dist, (size, params.k), scale_x)
        cols = sup[labels]
        on = np.take_along_axis(phis, np.broadcast_to(cols[:, None, :], (size, params.m, params.k)), 2)
        ys = np.matmul(on, xvals[:, :, None])[:, :, 0]
        yield start, labels, phis, ys, xvals, cols


def generate_batch(params: ModelParams, n: int, seed: int, stratified: bool = False,
                   retain_x: bool = False) -> Dataset:
    """Generate ``n`` measured samples together with the true supports.

    With ``stratified=True`` the labels are a random arrangement of
    ``n // l`` (or one more) copies of each label instead of i.i.d. uniform.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    truth = make_supports(params, _substream(seed, 0))
    phis = np.empty((n, params.m, params.d))
    ys = np.empty((n, params.m))
    labels = np.empty(n, dtype=np.int64)
    xs = np.zeros((n, params.d)) if retain_x else None
    for start, lab, ph, y, xvals, cols in iter_blocks(params, truth, n, seed, stratified):
        stop = start + lab.size
        phis[start:stop] = ph
        ys[start:stop] = y
        labels[start:stop] = lab
        if retain_x:
            np.put_along_axis(xs[start:stop], cols, xvals, axis=1)
    return Dataset(phis=phis, ys=ys, params=params, labels=labels, truth=truth, xs=xs)


def sample_proxies(params: ModelParams, n: int, seed: int, stratified: bool = False,
                   sampler: str = "full", supports: Optional[SupportTuple] = None):
    """Variance proxies of ``n`` fresh samples without keeping any matrix.

    Returns ``(proxies, labels, truth)`` with ``proxies`` of shape ``(n, d)``.

    ``sampler="full"`` draws exactly the same matrices as :func:`generate_batch`
    for the same seed, so the proxies agree with ``variance_proxies`` applied
    to that dataset.  ``sampler="marginal"`` (Gaussian matrices only) draws the
    sample's own support columns explicitly and every other proxy from its
    exact conditional law: a column independent of ``y`` gives
    ``phi_i^T y ~ N(0, |y|^2/m)``.  The joint law of the proxies is unchanged
    but the cost drops from ``m*d`` to ``m*k + d`` draws per sample.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    truth = supports if supports is not None else make_supports(params, _substream(seed, 0))
    out = np.empty((n, params.d))
    labels = np.empty(n, dtype=np.int64)
    if sampler == "full":
        for start, lab, ph, y, _, _ in iter_blocks(params, truth, n, seed, stratified):
            stop = start + lab.size
            out[start:stop] = np.matmul(y[:, None, :], ph)[:, 0, :] ** 2
            labels[start:stop] = lab
        return out, labels, truth
    if sampler != "marginal":
        raise ValueError(f"unknown sampler {sampler!r}")
    if params.matrix_dist is not Ensemble.GAUSSIAN:
        raise ValueError("the marginal sampler requires Gaussian measurement matrices")
    sup = truth.as_array()
    strat = _labels(params, n, seed, stratified)
    scale_phi = 1.0 / math.sqrt(params.m)
    for b, start, stop in _block_ranges(n):
        size = stop - start
        rng, lab = _block_core(params, seed, b, size, None if strat is None else strat[start:stop])
        on = rng.standard_normal((size, params.m, params.k)) * scale_phi
        xvals = _draw_entries(rng, params.sample_dist, (size, params.k), math.sqrt(params.lambda0))
        y = np.matmul(on, xvals[:, :, None])[:, :, 0]
        ynorm = np.sqrt(np.einsum("ij,ij->i", y, y) / params.m)
        z = rng.standard_normal((size, params.d)) * ynorm[:, None]
        block = z * z
        own = np.matmul(y[:, None, :], on)[:, 0, :] ** 2
        np.put_along_axis(block, sup[lab], own, axis=1)
        out[start:stop] = block
        labels[start:stop] = lab
    return out, labels, truth
