"""Digit-image pipeline: compressed projections, two-support recovery and PGM masks."""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..boosting import match_distance
from ..estimator import (RecoveryOptions, affinity_matrix, cluster_supports, mean_proxy,
                         recover_from_proxies, recover_union, two_largest_drops)
from ..model import ModelParams, SupportTuple, sample_proxies

TRUTH_PIXEL = 0.5
PROJECTION_BLOCK = 64


def emit_pgm(mask, rows: int, cols: int, path) -> None:
    """Write ``mask`` as a binary (P5) PGM: 255 on the set, 0 elsewhere, row-major."""
    if rows < 1 or cols < 1:
        raise ValueError("image dimensions must be positive")
    img = np.zeros(rows * cols, dtype=np.uint8)
    for c in mask:
        c = int(c)
        if not 0 <= c < rows * cols:
            raise ValueError(f"coordinate {c} outside a {rows}x{cols} image")
        img[c] = 255
    with open(path, "wb") as fh:
        fh.write(f"P5\n{cols} {rows}\n255\n".encode("ascii"))
        fh.write(img.tobytes())


def read_pgm(path) -> np.ndarray:
    with open(path, "rb") as fh:
        data = fh.read()
    parts = data.split(b"\n", 3)
    if parts[0] != b"P5" or len(parts) < 4:
        raise ValueError("not a binary PGM")
    cols, rows = (int(v) for v in parts[1].split())
    return np.frombuffer(parts[3], dtype=np.uint8, count=rows * cols).reshape(rows, cols)


def truth_masks(images: np.ndarray, labels: np.ndarray, digits) -> SupportTuple:
    """Pixels above ``TRUTH_PIXEL`` in at least half of each class's images."""
    flat = images.reshape(images.shape[0], -1)
    parts = []
    for dgt in digits:
        cls = flat[labels == dgt]
        if cls.shape[0] == 0:
            raise ValueError(f"no images of digit {dgt}")
        parts.append(np.flatnonzero(np.mean(cls > TRUTH_PIXEL, axis=0) >= 0.5))
    return SupportTuple(parts)


def project_proxies(xs: np.ndarray, m: int, seed: int) -> np.ndarray:
    """Variance proxies of ``xs`` under fresh Gaussian ``m x d`` projections."""
    n, d = xs.shape
    out = np.empty((n, d))
    for b, start in enumerate(range(0, n, PROJECTION_BLOCK)):
        stop = min(start + PROJECTION_BLOCK, n)
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(b,)))
        phis = rng.standard_normal((stop - start, m, d)) / math.sqrt(m)
        ys = np.matmul(phis, xs[start:stop, :, None])
        out[start:stop] = np.matmul(np.transpose(ys, (0, 2, 1)), phis)[:, 0, :] ** 2
    return out


def two_drop_supports(proxies, restarts: int = 10, seed: int = 0):
    """Two overlapping supports from the two sharpest drops of sorted ``lambda``.

    The earlier drop fixes the size of the intersection (the coordinates with
    the largest mean proxy), the later one the size of the union.  The rest of
    the union is split in two by the spectral step and the intersection joins
    both parts.  Returns ``(supports, info)``.
    """
    lam = mean_proxy(proxies)
    inter_size, union_size = two_largest_drops(lam)
    union = recover_union(lam, union_size)
    inter = recover_union(lam, inter_size)
    rest = np.setdiff1d(union, inter)
    if rest.size < 2:
        # no room for a split outside the intersection; cluster the whole union
        inter = np.array([], dtype=np.int64)
        rest = union
    aff = affinity_matrix(proxies, rest)
    parts, _ = cluster_supports(aff, 2, restarts=restarts, seed=seed)
    supports = SupportTuple([sorted(set(p) | set(inter.tolist())) for p in parts])
    info = {"intersection_size": int(inter.size), "union_size": int(union_size)}
    return supports, info


@dataclass
class DigitsResult:
    supports: SupportTuple
    truth: SupportTuple
    distance: int
    paths: list = field(default_factory=list)
    info: dict = field(default_factory=dict)


def run_digits(images, labels, digits, m: int, n: int, seed: int = 0,
               out_dir: Optional[str] = None, restarts: int = 10) -> DigitsResult:
    """Recover the pixel supports of two digit classes from compressed images.

    ``images`` is ``(count, rows, cols)`` with values in ``[0, 1]``.  ``n``
    images of the two digits are drawn at random, each projected by its own
    Gaussian matrix, and the two-drop heuristic is applied.  The estimates
    are ordered to match ``digits`` and, with ``out_dir``, written as
    ``support_<digit>.pgm``.
    """
    images = np.asarray(images, dtype=np.float64)
    labels = np.asarray(labels)
    if images.ndim != 3 or labels.shape != (images.shape[0],):
        raise ValueError("images must be (count, rows, cols) with one label each")
    digits = tuple(int(v) for v in digits)
    if len(digits) != 2 or digits[0] == digits[1]:
        raise ValueError("need two distinct digits")
    rows, cols = images.shape[1:]
    pool = np.flatnonzero(np.isin(labels, digits))
    if pool.size < n:
        raise ValueError(f"only {pool.size} images of digits {digits}, need {n}")
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(0,)))
    chosen = np.sort(rng.choice(pool, size=n, replace=False))
    xs = images[chosen].reshape(n, rows * cols)
    proxies = project_proxies(xs, m, int(np.random.SeedSequence(seed).generate_state(1)[0]))
    est, info = two_drop_supports(proxies, restarts=restarts, seed=seed)
    truth = truth_masks(images[chosen], labels[chosen], digits)
    match = match_distance(truth, est)
    ordered = SupportTuple([est[match.permutation[i]] for i in range(2)])
    paths = []
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        for dgt, part in zip(digits, ordered):
            path = os.path.join(out_dir, f"support_{dgt}.pgm")
            emit_pgm(part, rows, cols, path)
            paths.append(path)
    return DigitsResult(ordered, truth, match.distance, paths, info)


def synthetic_digits_trial(seed: int, d: int = 784, k: int = 150, m: int = 100, n: int = 2000,
                           lambda0: float = 1.0, restarts: int = 10) -> int:
    """Matched distance for two disjoint ``k``-supports in ``R^d`` (digit-sized stand-in)."""
    params = ModelParams(d=d, k=k, l=2, m=m, lambda0=lambda0)
    proxies, _, truth = sample_proxies(params, n, seed, sampler="marginal")
    est = recover_from_proxies(proxies, k, 2, RecoveryOptions(restarts=restarts, seed=seed))
    return match_distance(truth, est.supports_est).distance
