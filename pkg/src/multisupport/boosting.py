"""Permutation-matched distance between support tuples and median-trick boosting."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import linear_sum_assignment

from .estimator import RecoveryOptions, recover, recover_from_proxies
from .model import Dataset, SupportTuple

BRUTE_FORCE_MAX_L = 6


@dataclass
class MatchResult:
    distance: int
    permutation: tuple


@dataclass
class BoostResult:
    supports: SupportTuple
    block: int
    robust: bool
    estimates: list
    distances: np.ndarray
    blocks_used: list = None


def _cost(a: SupportTuple, b: SupportTuple) -> np.ndarray:
    if len(a) != len(b):
        raise ValueError(f"tuples have {len(a)} and {len(b)} parts")
    return np.array([[len(x ^ y) for y in b] for x in a], dtype=np.int64)


def brute_force_match(a: SupportTuple, b: SupportTuple) -> MatchResult:
    """Minimum over all ``l!`` permutations; first minimiser in lexicographic order."""
    cost = _cost(a, b)
    l = cost.shape[0]
    best = None
    for perm in itertools.permutations(range(l)):
        total = int(sum(cost[i, perm[i]] for i in range(l)))
        if best is None or total < best.distance:
            best = MatchResult(total, perm)
    return best


def hungarian_match(a: SupportTuple, b: SupportTuple) -> MatchResult:
    cost = _cost(a, b)
    rows, cols = linear_sum_assignment(cost)
    perm = tuple(int(c) for _, c in sorted(zip(rows, cols)))
    return MatchResult(int(cost[rows, cols].sum()), perm)


def match_distance(a: SupportTuple, b: SupportTuple) -> MatchResult:
    """``min_sigma sum_i |a_i  symdiff  b_sigma(i)|`` with its minimising ``sigma``."""
    if not isinstance(a, SupportTuple):
        a = SupportTuple(a)
    if not isinstance(b, SupportTuple):
        b = SupportTuple(b)
    if len(a) != len(b):
        raise ValueError(f"tuples have {len(a)} and {len(b)} parts")
    if len(a) <= BRUTE_FORCE_MAX_L:
        return brute_force_match(a, b)
    return hungarian_match(a, b)


def select_block(estimates: list, k: int, l: int, eps: float):
    """Pick the estimate close to a majority of the others.

    Block ``t`` qualifies when at least ``ceil(L/2)`` other blocks are within
    normalised distance ``2*eps`` (distance divided by ``k*l``).  The first
    qualifying block wins.  Without one, the block with the smallest median
    distance to the others is returned with ``robust=False``.
    """
    L = len(estimates)
    if L == 0:
        raise ValueError("no block estimates")
    dist = np.zeros((L, L), dtype=np.int64)
    for i in range(L):
        for j in range(i + 1, L):
            dist[i, j] = dist[j, i] = match_distance(estimates[i], estimates[j]).distance
    need = math.ceil(L / 2)
    close = dist / (k * l) <= 2 * eps
    for t in range(L):
        if L > 1 and int(close[t].sum()) - 1 >= need:
            return t, True, dist
    if L == 1:
        return 0, False, dist
    med = [float(np.median(np.delete(dist[t], t))) for t in range(L)]
    return int(np.argmin(med)), False, dist


def boosted_recover(data, blocks: int, k: int, l: int, eps: float,
                    options: Optional[RecoveryOptions] = None) -> BoostResult:
    """Run the estimator on ``blocks`` contiguous equal parts and select one.

    ``data`` is a :class:`Dataset` or an ``(n, d)`` proxy array.  Trailing
    samples that do not fill a block are dropped.  Blocks whose recovery
    raises are skipped; if all fail a ``RuntimeError`` is raised.
    ``block`` in the result is the data block that was selected and
    ``blocks_used`` lists the block behind each entry of ``estimates``.
    """
    if blocks < 1:
        raise ValueError("blocks must be at least 1")
    n = data.n if isinstance(data, Dataset) else np.asarray(data).shape[0]
    size = n // blocks
    if size < 1:
        raise ValueError(f"{n} samples cannot fill {blocks} blocks")
    estimates, used, failures = [], [], []
    for t in range(blocks):
        lo, hi = t * size, (t + 1) * size
        try:
            if isinstance(data, Dataset):
                res = recover(data.subset(lo, hi), k, l, options)
            else:
                res = recover_from_proxies(data[lo:hi], k, l, options)
        except (ValueError, RuntimeError) as exc:
            failures.append((t, exc))
            continue
        estimates.append(res.supports_est)
        used.append(t)
    if not estimates:
        raise RuntimeError(f"recovery failed on all {blocks} blocks: {failures[0][1]}")
    t, robust, dist = select_block(estimates, k, l, eps)
    return BoostResult(estimates[t], used[t], robust, estimates, dist, used)
