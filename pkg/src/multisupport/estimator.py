"""
Two-stage multiple support recovery.

Stage one averages per-sample variance proxies ``(Phi_i^T y)^2`` and keeps the
largest coordinates as the union of supports.  Stage two builds the affinity
matrix ``T = mean(a a^T)`` of the proxies restricted to that union, takes its
``l`` leading eigenvectors and groups their rows with l-means.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .model import Dataset, SupportTuple
from .numerics import lloyd_kmeans, sym_eig

SCREE_FLOOR = 1e-12
# rows per partial sum when accumulating T
AFFINITY_BLOCK = 4096


@dataclass
class ProxyBatch:
    proxies: np.ndarray
    mean: np.ndarray


@dataclass
class AffinityMatrix:
    t: np.ndarray
    gmap: np.ndarray


@dataclass
class RecoveryOptions:
    """Knobs for :func:`recover`.

    ``union_size`` is ``None`` for the known size ``k*l``, ``"auto"`` for the
    scree estimate, or an explicit integer.
    """

    union_size: Union[None, str, int] = None
    restarts: int = 10
    max_iter: int = 100
    seed: int = 0
    scree_floor: float = SCREE_FLOOR


@dataclass
class RecoveryResult:
    union_est: np.ndarray
    supports_est: SupportTuple
    eigenvalues: np.ndarray
    diagnostics: dict = field(default_factory=dict)


def variance_proxy(phi, y) -> np.ndarray:
    """Squared inner products of every column of ``phi`` with ``y``."""
    phi = np.asarray(phi, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if phi.ndim != 2 or y.ndim != 1 or phi.shape[0] != y.shape[0]:
        raise ValueError(f"dimension mismatch: phi {phi.shape}, y {y.shape}")
    return (y @ phi) ** 2


def variance_proxies(phis, ys) -> np.ndarray:
    """Batched :func:`variance_proxy` over ``(n, m, d)`` matrices."""
    phis = np.asarray(phis, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    if phis.ndim != 3 or ys.shape != phis.shape[:2]:
        raise ValueError(f"dimension mismatch: phis {phis.shape}, ys {ys.shape}")
    return np.matmul(ys[:, None, :], phis)[:, 0, :] ** 2


def _pairwise_sum(parts: list) -> np.ndarray:
    while len(parts) > 1:
        nxt = [parts[i] + parts[i + 1] for i in range(0, len(parts) - 1, 2)]
        if len(parts) % 2:
            nxt.append(parts[-1])
        parts = nxt
    return parts[0]


def mean_proxy(proxies) -> np.ndarray:
    proxies = np.asarray(proxies, dtype=np.float64)
    if proxies.ndim != 2 or proxies.shape[0] == 0:
        raise ValueError("need at least one proxy vector")
    # numpy reduces axis 0 by pairwise summation
    return proxies.sum(axis=0) / proxies.shape[0]


def proxy_batch(proxies) -> ProxyBatch:
    proxies = np.asarray(proxies, dtype=np.float64)
    return ProxyBatch(proxies=proxies, mean=mean_proxy(proxies))


def recover_union(lambda_tilde, size: int) -> np.ndarray:
    """Indices of the ``size`` largest entries, ascending.  Ties favour lower indices."""
    lam = np.asarray(lambda_tilde, dtype=np.float64)
    if not 1 <= size <= lam.size:
        raise ValueError(f"union size must lie in [1, {lam.size}], got {size}")
    order = np.argsort(-lam, kind="stable")
    return np.sort(order[:size])


def estimate_union_size(lambda_tilde, floor: float = SCREE_FLOOR) -> int:
    """Position of the sharpest drop in the sorted entries.

    Returns the ``i`` in ``[1, d-1]`` maximising
    ``lam_(i) / (lam_(i+1) + floor)`` over the descending order statistics;
    the first maximiser wins.
    """
    lam = np.sort(np.asarray(lambda_tilde, dtype=np.float64))[::-1]
    if lam.size < 2:
        raise ValueError("need at least two entries")
    ratios = lam[:-1] / (lam[1:] + floor)
    return int(np.argmax(ratios)) + 1


def two_largest_drops(lambda_tilde, floor: float = SCREE_FLOOR) -> tuple:
    """The two sharpest drops of the sorted entries, as ``(smaller, larger)`` positions."""
    lam = np.sort(np.asarray(lambda_tilde, dtype=np.float64))[::-1]
    if lam.size < 3:
        raise ValueError("need at least three entries")
    ratios = lam[:-1] / (lam[1:] + floor)
    top = np.argsort(-ratios, kind="stable")[:2] + 1
    return int(min(top)), int(max(top))


def affinity_matrix(proxies, union_est) -> AffinityMatrix:
    """``T = (1/n) sum_j a_j a_j^T`` over proxies restricted to ``union_est``.

    Rows are accumulated in fixed blocks whose partial sums are combined
    pairwise, so the result does not depend on how the caller chunked data.
    """
    proxies = np.asarray(proxies, dtype=np.float64)
    gmap = np.sort(np.asarray(list(union_est), dtype=np.int64))
    if gmap.size == 0:
        raise ValueError("union estimate is empty")
    n = proxies.shape[0]
    if n == 0:
        raise ValueError("need at least one proxy vector")
    a = proxies[:, gmap]
    parts = []
    for start in range(0, n, AFFINITY_BLOCK):
        blk = a[start:start + AFFINITY_BLOCK]
        parts.append(blk.T @ blk)
    t = _pairwise_sum(parts) / n
    t = 0.5 * (t + t.T)
    return AffinityMatrix(t=t, gmap=gmap)


def _group(assign: np.ndarray, gmap: np.ndarray, l: int) -> SupportTuple:
    groups = [gmap[assign == c] for c in range(l)]
    nonempty = sorted((g for g in groups if g.size), key=lambda g: int(g.min()))
    empty = [g for g in groups if not g.size]
    return SupportTuple(nonempty + empty)


def cluster_supports(aff: AffinityMatrix, l: int, restarts: int = 10, seed: int = 0,
                     max_iter: int = 100, eig=None):
    """Split the union into ``l`` groups by l-means on leading eigenvector rows.

    Returns ``(supports, info)``.  Supports are ordered by their smallest
    member; if l-means leaves a group empty it is kept as an empty part at the
    end and ``info["nonempty"]`` reports the count.
    """
    if l < 1:
        raise ValueError("l must be at least 1")
    n = aff.t.shape[0]
    if l > n:
        raise ValueError(f"cannot split {n} coordinates into {l} groups")
    eig = eig if eig is not None else sym_eig(aff.t)
    rows = eig.vectors[:, :l]
    km = lloyd_kmeans(rows, l, restarts=restarts, seed=seed, max_iter=max_iter)
    supports = _group(km.assignments, aff.gmap, l)
    info = {
        "objective": km.objective,
        "restarts": restarts,
        "best_restart": km.restart,
        "iterations": km.iterations,
        "nonempty": sum(1 for p in supports if p),
        "eigenvalues": eig.values,
    }
    return supports, info


def _union_size(lam, k, l, options):
    size = options.union_size
    if size is None:
        return k * l
    if size == "auto":
        return estimate_union_size(lam, options.scree_floor)
    return int(size)


def recover_from_proxies(proxies, k: int, l: int, options: Optional[RecoveryOptions] = None) -> RecoveryResult:
    options = options or RecoveryOptions()
    proxies = np.asarray(proxies, dtype=np.float64)
    if k * l > proxies.shape[1]:
        raise ValueError("k*l exceeds d")
    lam = mean_proxy(proxies)
    size = _union_size(lam, k, l, options)
    union = recover_union(lam, size)
    aff = affinity_matrix(proxies, union)
    supports, info = cluster_supports(aff, min(l, union.size), options.restarts, options.seed, options.max_iter)
    if len(supports) < l:
        supports = SupportTuple(list(supports) + [()] * (l - len(supports)))
    eigenvalues = info.pop("eigenvalues")
    info["union_size"] = int(size)
    return RecoveryResult(union_est=union, supports_est=supports, eigenvalues=eigenvalues, diagnostics=info)


def recover(dataset: Dataset, k: int, l: int, options: Optional[RecoveryOptions] = None) -> RecoveryResult:
    """Run the full two-stage estimator on a dataset."""
    if k * l > dataset.params.d:
        raise ValueError("k*l exceeds d")
    return recover_from_proxies(variance_proxies(dataset.phis, dataset.ys), k, l, options)


def split_second_eigenvector(aff: AffinityMatrix, tau: float, eig=None):
    """Threshold split of the union on the second leading eigenvector.

    Entries above ``tau`` go to the first set, below ``-tau`` to the second,
    and the band ``[-tau, tau]`` to both.  The vector is signed so that its
    largest-magnitude entry is positive.
    """
    if not tau > 0:
        raise ValueError("tau must be positive")
    if aff.t.shape[0] < 2:
        raise ValueError("need at least two coordinates in the union")
    eig = eig if eig is not None else sym_eig(aff.t)
    v2 = eig.vectors[:, 1]
    band = np.abs(v2) <= tau
    s1 = set(aff.gmap[(v2 > tau) | band].tolist())
    s2 = set(aff.gmap[(v2 < -tau) | band].tolist())
    return s1, s2, v2


def recover_overlapping_two(dataset_or_proxies, k: int, tau: float,
                            union_size: Union[None, str, int] = None,
                            drop_diagonal: bool = True):
    """Two possibly overlapping supports via a thresholded eigenvector split.

    Accepts a :class:`Dataset` or an ``(n, d)`` proxy array.  ``union_size``
    defaults to ``2k``; pass the true size, an integer, or ``"auto"``.

    With ``drop_diagonal`` the split uses ``T`` with its diagonal set to
    zero.  Coordinates shared by both supports are on-support in every
    sample, so their diagonal entries are roughly twice the others and would
    otherwise pull the second eigenvector onto them instead of leaving them
    near zero.
    """
    if isinstance(dataset_or_proxies, Dataset):
        if dataset_or_proxies.params.l != 2:
            raise ValueError("overlap mode is defined for l = 2 only")
        proxies = variance_proxies(dataset_or_proxies.phis, dataset_or_proxies.ys)
    else:
        proxies = np.asarray(dataset_or_proxies, dtype=np.float64)
    lam = mean_proxy(proxies)
    size = _union_size(lam, k, 2, RecoveryOptions(union_size=union_size))
    aff = affinity_matrix(proxies, recover_union(lam, size))
    if drop_diagonal:
        t = aff.t.copy()
        np.fill_diagonal(t, 0.0)
        aff = AffinityMatrix(t=t, gmap=aff.gmap)
    s1, s2, _ = split_second_eigenvector(aff, tau)
    return s1, s2
