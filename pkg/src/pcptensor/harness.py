"""Synthetic models, Poisson sampling and the Monte Carlo / rank experiments.

Every random quantity comes from a generator seeded by
``derive_seed(seed, *keys)``, so a replicate depends only on the base seed
and its own cell/replicate keys. Results are identical whether cells run
serially or in worker processes.
"""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
import csv
import io
import itertools
import os
import time

import numpy as np

from .fisher import FimTooLarge, MAX_ORDER, fim, numerical_rank
from .kruskal import KruskalModel, full_tensor
from .likelihood import batch_scores

__all__ = [
    "GenSpec",
    "McFimEstimate",
    "McGrid",
    "RankGrid",
    "CSV_FIELDS",
    "derive_seed",
    "derive_rng",
    "generate_model",
    "sample_poisson",
    "mc_fim",
    "run_mc_validation",
    "run_rank_sweep",
    "rows_to_csv",
    "default_workers",
]

CSV_FIELDS = ["experiment", "N", "P", "R", "S", "K", "rep", "metric", "value", "seconds"]
_MC_KEY, _RANK_KEY, _SAMPLE_KEY = 51, 52, 7


def derive_seed(seed, *keys):
    """Integer seed for the stream identified by ``(seed, *keys)``."""
    ints = [int(seed)] + [int(k) for k in keys]
    if any(k < 0 for k in ints):
        raise ValueError("seed and keys must be non-negative integers")
    return int(np.random.SeedSequence(ints).generate_state(1, np.uint64)[0])


def derive_rng(seed, *keys):
    return np.random.default_rng(derive_seed(seed, *keys))


def _s_key(s):
    # S enters seed keys as an integer in thousandths
    return int(round(float(s) * 1000))


@dataclass(frozen=True)
class GenSpec:
    N: int
    P: int
    R: int
    S: float = 1.0
    seed: int = 0

    def __post_init__(self):
        for name in ("N", "P", "R"):
            v = getattr(self, name)
            if isinstance(v, bool) or int(v) != v or v < 1:
                raise ValueError(f"{name} must be a positive integer, got {v!r}")
        if not self.S > 0:
            raise ValueError(f"S must be positive, got {self.S!r}")


def _simplex_columns(rng, n, r, floor):
    # uniform on {v : sum v = 1, v_i >= floor}: shrink a flat Dirichlet draw
    return floor + (1.0 - n * floor) * rng.dirichlet(np.ones(n), size=r).T


def generate_model(spec):
    """Random model whose mean entry is exactly ``S``.

    Each column starts uniform on the unit simplex with minimum entry
    ``1/(100N)``. Component ``r`` then carries total mass proportional to
    ``r`` (1-based), split evenly across the modes as ``lambda ** (1/P)``.
    """
    n, P, R = spec.N, spec.P, spec.R
    floor = 1.0 / (100 * n)
    assert n * floor < 1.0
    rng = np.random.default_rng(spec.seed)
    lam = spec.S * n**P / (R * (R + 1) / 2) * np.arange(1, R + 1)
    scale = lam ** (1.0 / P)
    return KruskalModel(tuple(_simplex_columns(rng, n, R, floor) * scale for _ in range(P)))


def sample_poisson(m, seed=0, size=None):
    """Independent Poisson counts with means ``m``.

    ``seed`` may be an int or a ``numpy.random.Generator``. With ``size``
    the result has shape ``(size, *m.shape)``.
    """
    m = np.asarray(m, dtype=float)
    if np.any(m < 0) or not np.all(np.isfinite(m)):
        raise ValueError("Poisson means must be finite and non-negative")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    shape = m.shape if size is None else (int(size),) + m.shape
    return rng.poisson(m, size=shape).astype(float)


@dataclass(frozen=True)
class McFimEstimate:
    K: int
    mean_score: np.ndarray = field(repr=False)
    info_hat: np.ndarray = field(repr=False)
    rel_error: float
    score_sd: np.ndarray = field(repr=False)


def mc_fim(model, K, seed=0, info=None, chunk=256):
    """Centered score covariance over ``K`` Poisson draws from ``model``.

    ``info`` is the analytic expected information to compare against; it
    is computed when omitted.
    """
    K = int(K)
    if K < 2:
        raise ValueError("K must be at least 2")
    if info is None:
        info = fim(model).matrix
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    m = full_tensor(model)
    parts = []
    for start in range(0, K, chunk):
        xs = sample_poisson(m, rng, size=min(chunk, K - start))
        parts.append(batch_scores(xs, model))
    s = np.concatenate(parts)
    mu = s.mean(axis=0)
    c = s - mu
    info_hat = c.T @ c / K
    info_hat = 0.5 * (info_hat + info_hat.T)
    err = np.linalg.norm(info - info_hat) / np.linalg.norm(info)
    return McFimEstimate(K, mu, info_hat, float(err), c.std(axis=0))


@dataclass(frozen=True)
class McGrid:
    N: tuple = (10,)
    S: tuple = (1.0,)
    R: tuple = (1, 2)
    P: tuple = (3,)
    K: tuple = (4, 16, 64, 256, 1024)

    def cells(self):
        return list(itertools.product(self.N, self.P, self.R, self.S))


@dataclass(frozen=True)
class RankGrid:
    N: tuple = (10, 25)
    P: tuple = (2, 3)
    R: tuple = (1, 2, 3, 4)
    S: tuple = (4.0,)

    def cells(self):
        return list(itertools.product(self.N, self.P, self.R, self.S))


def _check_grid(grid, reps):
    if int(reps) < 1:
        raise ValueError("reps must be at least 1")
    for name, vals in vars(grid).items():
        if len(vals) == 0:
            raise ValueError(f"grid axis {name} is empty")


def default_workers():
    """Worker count from ``PCPTENSOR_WORKERS`` (default 1)."""
    try:
        return max(1, int(os.environ.get("PCPTENSOR_WORKERS", "1")))
    except ValueError:
        return 1


def _row(exp, n, p, r, s, k, rep, metric, value, secs):
    return dict(zip(CSV_FIELDS, (exp, n, p, r, s, k, rep, metric, value, secs)))


def _mc_task(args):
    seed, (n, p, r, s), rep, ks, max_order = args
    skey = _s_key(s)
    spec = GenSpec(n, p, r, s, derive_seed(seed, _MC_KEY, n, p, r, skey, rep))
    model = generate_model(spec)
    if r * n * p > max_order:
        raise FimTooLarge(r * n * p, max_order)
    info = fim(model, max_order=max_order).matrix
    rows = []
    for k in ks:
        t1 = time.perf_counter()
        rng = derive_rng(seed, _MC_KEY, n, p, r, skey, rep, _SAMPLE_KEY, k)
        est = mc_fim(model, k, rng, info=info)
        rows.append(_row("mc_fim", n, p, r, s, k, rep, "rel_error", est.rel_error,
                         time.perf_counter() - t1))
    return rows


def _rank_task(args):
    seed, (n, p, r, s), rep, max_order = args
    t0 = time.perf_counter()
    spec = GenSpec(n, p, r, s, derive_seed(seed, _RANK_KEY, n, p, r, _s_key(s), rep))
    verdict = numerical_rank(fim(generate_model(spec), max_order=max_order))
    secs = time.perf_counter() - t0
    return [
        _row("rank", n, p, r, s, "", rep, "numerical_rank", verdict.numerical_rank, secs),
        _row("rank", n, p, r, s, "", rep, "conjectured_rank", verdict.conjectured_rank, secs),
        _row("rank", n, p, r, s, "", rep, "ratio", verdict.ratio, secs),
    ]


def _run(task, jobs, workers):
    workers = default_workers() if workers is None else int(workers)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            chunks = list(ex.map(task, jobs))
    else:
        chunks = [task(j) for j in jobs]
    rows = [row for c in chunks for row in c]
    rows.sort(key=lambda d: (d["N"], d["P"], d["R"], d["S"], str(d["K"]).zfill(8),
                             d["rep"], d["metric"]))
    return rows


def run_mc_validation(grid=McGrid(), reps=100, seed=0, max_order=MAX_ORDER, workers=None):
    """Relative error of the Monte Carlo information estimate per cell, K and replicate.

    One model per (cell, replicate); each K draws a fresh, independent
    sample set from that model.
    """
    _check_grid(grid, reps)
    ks = tuple(int(k) for k in grid.K)
    if min(ks) < 2:
        raise ValueError("every K must be at least 2")
    for n, p, r, _ in grid.cells():
        if r * n * p > max_order:
            raise FimTooLarge(r * n * p, max_order)
    jobs = [(seed, c, rep, ks, max_order) for c in grid.cells() for rep in range(reps)]
    return _run(_mc_task, jobs, workers)


def run_rank_sweep(grid=RankGrid(), reps=10, seed=0, max_order=MAX_ORDER, workers=None):
    """Numerical vs conjectured rank of the expected information per cell and replicate."""
    _check_grid(grid, reps)
    for n, p, r, _ in grid.cells():
        if r * n * p > max_order:
            raise FimTooLarge(r * n * p, max_order)
    jobs = [(seed, c, rep, max_order) for c in grid.cells() for rep in range(reps)]
    return _run(_rank_task, jobs, workers)


def rows_to_csv(rows):
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=CSV_FIELDS, lineterminator="\n")
    w.writeheader()
    for row in rows:
        out = dict(row)
        for key in ("value", "seconds", "S"):
            if isinstance(out[key], float):
                out[key] = repr(out[key])
        w.writerow(out)
    return buf.getvalue()
