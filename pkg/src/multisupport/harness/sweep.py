"""Seeded Monte Carlo sweeps over model parameters with CSV output."""

from __future__ import annotations

import io
import itertools
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..boosting import boosted_recover, match_distance
from ..estimator import RecoveryOptions, recover_from_proxies
from ..model import Ensemble, ModelParams, sample_proxies

log = logging.getLogger(__name__)

CSV_HEADER = "d,k,m,l,n,trials,successes,success_rate,mean_distance,wall_ms,seed"

_LIST_KEYS = ("d", "k", "m", "l", "n", "ensemble")
_INT_KEYS = ("trials", "base_seed", "boost", "restarts")
_FLOAT_KEYS = ("eps", "lambda0", "multiplier")


@dataclass
class SweepConfig:
    """Grid of model settings plus the trial protocol.

    A trial succeeds when the matched distance is below
    ``multiplier * eps * k * l``.  For ``l = 2`` and ``multiplier = 1`` this
    is the ``2 * eps * k`` rule.
    """

    d: list
    k: list
    m: list
    l: list
    n: list
    trials: int = 10
    eps: float = 0.2
    lambda0: float = 1.0
    ensemble: list = field(default_factory=lambda: ["gaussian"])
    base_seed: int = 0
    multiplier: float = 1.0
    boost: Optional[int] = None
    restarts: int = 10
    sampler: str = "full"
    stratified: bool = False

    def __post_init__(self):
        for key in ("d", "k", "m", "l", "n"):
            vals = getattr(self, key)
            if not vals or any(int(v) < 1 for v in vals):
                raise ValueError(f"grid values for {key} must be positive")
            setattr(self, key, [int(v) for v in vals])
        self.ensemble = [Ensemble.parse(e).value for e in self.ensemble]
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if not 0 < self.eps <= 1:
            raise ValueError("eps must lie in (0, 1]")
        if self.multiplier <= 0:
            raise ValueError("multiplier must be positive")
        if self.boost is not None and self.boost < 1:
            raise ValueError("boost must be at least 1")
        if self.sampler not in ("full", "marginal"):
            raise ValueError(f"unknown sampler {self.sampler!r}")

    def cells(self) -> list:
        """Grid cells in emission order: ensemble, d, k, m, l, n."""
        return list(itertools.product(self.ensemble, self.d, self.k, self.m, self.l, self.n))


@dataclass
class SweepRecord:
    d: int
    k: int
    m: int
    l: int
    n: int
    trials: int
    successes: int
    success_rate: float
    mean_distance: float
    wall_ms: float
    seed: int

    def csv_row(self) -> str:
        return ",".join([
            str(self.d), str(self.k), str(self.m), str(self.l), str(self.n),
            str(self.trials), str(self.successes),
            f"{self.success_rate:.6g}", f"{self.mean_distance:.6g}",
            f"{self.wall_ms:.6g}", str(self.seed),
        ])


def parse_config(text: str) -> SweepConfig:
    """Read flat ``key=value`` lines; list keys may repeat or hold commas.

    Blank lines and ``#`` comments are ignored.
    """
    lists: dict = {}
    scalars: dict = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        if key in _LIST_KEYS:
            lists.setdefault(key, []).extend(v.strip() for v in value.split(",") if v.strip())
        elif key in _INT_KEYS:
            scalars[key] = int(value)
        elif key in _FLOAT_KEYS:
            scalars[key] = float(value)
        elif key == "sampler":
            scalars[key] = value
        elif key == "stratified":
            scalars[key] = value.lower() in ("1", "true", "yes")
        else:
            raise ValueError(f"line {lineno}: unknown key {key!r}")
    missing = [k for k in ("d", "k", "m", "l", "n") if k not in lists]
    if missing:
        raise ValueError(f"config lacks {', '.join(missing)}")
    kwargs = {k: [int(v) for v in lists[k]] for k in ("d", "k", "m", "l", "n")}
    if "ensemble" in lists:
        kwargs["ensemble"] = lists["ensemble"]
    kwargs.update(scalars)
    return SweepConfig(**kwargs)


def load_config(path) -> SweepConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def trial_seed(base_seed: int, cell: int, trial: int) -> int:
    return int(np.random.SeedSequence([base_seed, cell, trial]).generate_state(1)[0])


def run_trial(config: SweepConfig, cell: int, trial: int):
    """One seeded end-to-end trial.  Returns the matched distance or ``None`` on failure."""
    ens, d, k, m, l, n = config.cells()[cell]
    seed = trial_seed(config.base_seed, cell, trial)
    try:
        params = ModelParams(d=d, k=k, l=l, m=m, lambda0=config.lambda0,
                             sample_dist=ens, matrix_dist=ens)
        proxies, _, truth = sample_proxies(params, n, seed, stratified=config.stratified,
                                           sampler=config.sampler)
        options = RecoveryOptions(restarts=config.restarts, seed=seed)
        if config.boost:
            est = boosted_recover(proxies, config.boost, k, l, config.eps, options).supports
        else:
            est = recover_from_proxies(proxies, k, l, options).supports_est
        return match_distance(truth, est).distance
    except (ValueError, RuntimeError) as exc:
        log.warning("cell %d trial %d failed: %s", cell, trial, exc)
        return None


def _run_task(args):
    config, cell, trial = args
    start = time.perf_counter()
    dist = run_trial(config, cell, trial)
    return dist, time.perf_counter() - start


def run_sweep(config: SweepConfig, threads: int = 1, timing: bool = False) -> list:
    """Run every cell and return one record per cell in grid order.

    ``wall_ms`` is the summed trial time when ``timing`` is set and ``0``
    otherwise, so that default output is reproducible byte for byte.
    """
    if threads < 1:
        raise ValueError("threads must be at least 1")
    cells = config.cells()
    tasks = [(config, c, t) for c in range(len(cells)) for t in range(config.trials)]
    if threads == 1:
        results = [_run_task(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_run_task, tasks, chunksize=max(1, len(tasks) // (4 * threads))))
    records = []
    for c, (ens, d, k, m, l, n) in enumerate(cells):
        chunk = results[c * config.trials:(c + 1) * config.trials]
        dists = [r[0] for r in chunk if r[0] is not None]
        threshold = config.multiplier * config.eps * k * l
        successes = sum(1 for x in dists if x < threshold)
        mean_dist = float(np.mean(dists)) if dists else math.nan
        wall = 1000.0 * sum(r[1] for r in chunk) if timing else 0.0
        records.append(SweepRecord(d, k, m, l, n, config.trials, successes,
                                   successes / config.trials, mean_dist, wall, config.base_seed))
    return records


def format_csv(records: list) -> str:
    buf = io.StringIO()
    buf.write(CSV_HEADER + "\n")
    for rec in records:
        buf.write(rec.csv_row() + "\n")
    return buf.getvalue()


def required_n(records: list, level: float = 0.9) -> dict:
    """Smallest grid ``n`` reaching ``level`` per ``(d, k, m, l)``; ``inf`` if none does."""
    out: dict = {}
    for rec in records:
        key = (rec.d, rec.k, rec.m, rec.l)
        cur = out.get(key, math.inf)
        if rec.success_rate >= level and rec.n < cur:
            cur = rec.n
        out[key] = cur
    return out
