"""Dense symmetric eigendecomposition (cyclic Jacobi) and Lloyd's l-means."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

JACOBI_TOL = 1e-12
JACOBI_MAX_SWEEPS = 50
# above this size the sweeps start from a LAPACK basis instead of the identity
WARM_START_MIN = 65


class ConvergenceError(RuntimeError):
    def __init__(self, message, residual):
        super().__init__(f"{message} (residual {residual:.3e})")
        self.residual = residual


@dataclass
class EigenDecomposition:
    values: np.ndarray
    vectors: np.ndarray
    sweeps: int = 0


@dataclass
class KMeansResult:
    assignments: np.ndarray
    centers: np.ndarray
    objective: float
    history: list = field(default_factory=list)
    restart: int = 0
    iterations: int = 0


def _round_robin(n: int):
    """Pairings for one Jacobi sweep: ``n - 1`` rounds of disjoint pairs.

    Every unordered pair of ``range(n)`` appears exactly once per sweep.
    Odd ``n`` gets a dummy slot and the pair touching it is dropped.
    """
    slots = list(range(n)) + ([-1] if n % 2 else [])
    size = len(slots)
    rounds = []
    for _ in range(size - 1):
        ps, qs = [], []
        for i in range(size // 2):
            p, q = slots[i], slots[size - 1 - i]
            if p >= 0 and q >= 0:
                ps.append(min(p, q))
                qs.append(max(p, q))
        rounds.append((np.array(ps, dtype=np.intp), np.array(qs, dtype=np.intp)))
        slots = [slots[0], slots[-1]] + slots[1:-1]
    return rounds


def _rotate_rows(a, p, q, c, s):
    a = np.ascontiguousarray(a)
    rp, rq = a[p], a[q]
    a[p] = c[:, None] * rp - s[:, None] * rq
    a[q] = s[:, None] * rp + c[:, None] * rq
    return a


def _off_norm(a: np.ndarray) -> float:
    off = a - np.diag(np.diag(a))
    return float(np.sqrt(np.sum(off * off)))


def sym_eig(a, tol: float = JACOBI_TOL, max_sweeps: int = JACOBI_MAX_SWEEPS,
            warm_start: bool | None = None) -> EigenDecomposition:
    """Full eigendecomposition of a real symmetric matrix by cyclic Jacobi.

    Each sweep visits every off-diagonal pair once, in round-robin order so
    that the ``n // 2`` rotations of a round act on disjoint index pairs and
    can be applied together.  Sweeps stop once the off-diagonal Frobenius
    mass is at most ``tol * ||A||_F``.

    With ``warm_start`` (default: ``n >= WARM_START_MIN``) the sweeps run on
    ``Q^T A Q`` for an orthogonal ``Q`` from ``numpy.linalg.eigh``; this only
    changes where the iteration starts, not the stopping rule or the output
    conventions.

    Eigenvalues come back in descending order.  Near-equal eigenvalues are
    ordered by the position of their vector's largest-magnitude entry, and
    every vector is signed so that entry is positive.

    Raises
    ------
    ValueError
        If ``a`` is not square or is asymmetric beyond ``1e-10``.
    ConvergenceError
        If the sweep cap is reached first.
    """
    a = np.array(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("matrix must be square")
    n = a.shape[0]
    scale = max(1.0, float(np.max(np.abs(a)))) if n else 1.0
    if n and np.max(np.abs(a - a.T)) > 1e-10 * scale:
        raise ValueError("matrix is not symmetric")
    a = 0.5 * (a + a.T)
    if warm_start is None:
        warm_start = n >= WARM_START_MIN
    if warm_start and n > 1:
        _, q0 = np.linalg.eigh(a)
        vt = np.ascontiguousarray(q0.T)
        a = q0.T @ a @ q0
        a = 0.5 * (a + a.T)
    else:
        vt = np.eye(n)
    fro = float(np.sqrt(np.sum(a * a)))
    target = tol * fro
    sweeps = 0
    rounds = _round_robin(n) if n > 1 else []
    while _off_norm(a) > target:
        if sweeps >= max_sweeps:
            raise ConvergenceError("Jacobi did not converge", _off_norm(a) / max(fro, 1e-300))
        sweeps += 1
        for p, q in rounds:
            apq = a[p, q]
            live = apq != 0.0
            if not live.any():
                continue
            p, q, apq = p[live], q[live], apq[live]
            app, aqq = a[p, p], a[q, q]
            with np.errstate(over="ignore"):
                # a huge theta means a negligible rotation; t underflows to 0
                theta = (aqq - app) / (2.0 * apq)
                t = np.sign(theta) / (np.abs(theta) + np.sqrt(1.0 + theta * theta))
            t[theta == 0.0] = 1.0
            c = 1.0 / np.sqrt(1.0 + t * t)
            s = t * c
            # A <- J^T A J with J[p,p]=J[q,q]=c, J[p,q]=s, J[q,p]=-s; the
            # column pass is a row pass on the transpose (contiguous rows)
            a = _rotate_rows(_rotate_rows(a, p, q, c, s).T, p, q, c, s)
            a[p, q] = 0.0
            a[q, p] = 0.0
            vt = _rotate_rows(vt, p, q, c, s)
    values = np.diag(a).copy()
    values, v = _canonical_order(values, np.ascontiguousarray(vt.T))
    return EigenDecomposition(values=values, vectors=v, sweeps=sweeps)


def _canonical_order(values: np.ndarray, vectors: np.ndarray):
    n = values.size
    if n == 0:
        return values, vectors
    lead = np.argmax(np.abs(vectors), axis=0)
    signs = np.where(vectors[lead, np.arange(n)] < 0, -1.0, 1.0)
    vectors = vectors * signs
    order = list(np.argsort(-values, kind="stable"))
    tie = 1e-12 * max(1.0, float(np.max(np.abs(values))))
    out, i = [], 0
    while i < n:
        j = i + 1
        while j < n and values[order[j - 1]] - values[order[j]] <= tie:
            j += 1
        group = order[i:j]
        out.extend(sorted(group, key=lambda c: (lead[c], c)))
        i = j
    out = np.array(out, dtype=np.intp)
    return values[out], vectors[:, out]


def top_eigenvectors(a, l: int) -> np.ndarray:
    """The ``l`` leading unit eigenvectors of ``a`` as columns."""
    a = np.asarray(a, dtype=np.float64)
    if not 1 <= l <= a.shape[0]:
        raise ValueError(f"l must lie in [1, {a.shape[0]}], got {l}")
    return sym_eig(a).vectors[:, :l]


def _sq_dists(rows: np.ndarray, centers: np.ndarray) -> np.ndarray:
    diff = rows[:, None, :] - centers[None, :, :]
    return np.sum(diff * diff, axis=2)


def _plusplus(rows: np.ndarray, l: int, rng: np.random.Generator) -> np.ndarray:
    n = rows.shape[0]
    chosen = [int(rng.integers(n))]
    d2 = np.sum((rows - rows[chosen[0]]) ** 2, axis=1)
    for _ in range(1, l):
        total = d2.sum()
        if total > 0:
            idx = int(rng.choice(n, p=d2 / total))
        else:
            idx = int(rng.integers(n))
        chosen.append(idx)
        d2 = np.minimum(d2, np.sum((rows - rows[idx]) ** 2, axis=1))
    return rows[chosen].copy()


def _lloyd(rows, centers, max_iter):
    l = centers.shape[0]
    history = []
    assign = None
    it = 0
    for it in range(1, max_iter + 1):
        d2 = _sq_dists(rows, centers)
        new = np.argmin(d2, axis=1)
        point_cost = d2[np.arange(rows.shape[0]), new]
        history.append(float(np.sum(point_cost)))
        if assign is not None and np.array_equal(new, assign):
            break
        assign = new
        counts = np.bincount(assign, minlength=l)
        for c in range(l):
            if counts[c]:
                centers[c] = rows[assign == c].mean(axis=0)
        for c in np.flatnonzero(counts == 0):
            # reseed an empty center at the point farthest from its own center
            own = np.sum((rows - centers[assign]) ** 2, axis=1)
            far = int(np.argmax(own))
            if own[far] > 0:
                centers[c] = rows[far]
                assign = assign.copy()
                assign[far] = c
    return assign, centers, history, it


def lloyd_kmeans(rows, l: int, restarts: int = 10, seed: int = 0, max_iter: int = 100) -> KMeansResult:
    """Best of ``restarts`` runs of Lloyd's algorithm with l-means++ seeding.

    Restart ``r`` draws its seeding from ``SeedSequence(seed, spawn_key=(r,))``.
    The run with the lowest objective wins, ties going to the lower restart.
    ``history`` records the objective after every assignment step of the
    winning run.
    """
    rows = np.asarray(rows, dtype=np.float64)
    if rows.ndim == 1:
        rows = rows[:, None]
    n = rows.shape[0]
    if not 1 <= l <= n:
        raise ValueError(f"need 1 <= l <= number of rows ({n}), got {l}")
    if restarts < 1:
        raise ValueError("restarts must be at least 1")
    best = None
    for r in range(restarts):
        rng = np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(r,)))
        centers = _plusplus(rows, l, rng)
        assign, centers, history, iters = _lloyd(rows, centers, max_iter)
        objective = float(np.sum((rows - centers[assign]) ** 2))
        if best is None or objective < best.objective:
            best = KMeansResult(assign, centers, objective, history, r, iters)
    return best
