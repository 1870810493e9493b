"""Random instances, the counting bound on observations, and the
completion phase-sweep harness.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import NamedTuple, Sequence

import numpy as np

from .core import as_bool_matrix, boolean_product, reconstruction_error
from .engine import EngineConfig, run_map
from .errors import BoolMFError
from .model import Channel, Observation, Priors

__all__ = [
    "balanced_density",
    "generate_instance",
    "info_bound",
    "observe_exact",
    "SweepGrid",
    "SweepRow",
    "run_sweep",
]


def balanced_density(K: int) -> float:
    """Factor density ``sqrt(1 - 0.5**(1/K))`` giving ``P(z = 1) = 1/2`` for rank K."""
    if K < 1:
        raise BoolMFError("K must be >= 1")
    return math.sqrt(1.0 - 0.5 ** (1.0 / K))


def generate_instance(M, N, K, px, py, seed):
    """I.i.d. Bernoulli factors and their Boolean product: ``(X, Y, Z)``."""
    for p in (px, py):
        if not 0.0 <= p <= 1.0:
            raise BoolMFError("densities must lie in [0, 1]")
    rng = np.random.default_rng(seed)
    X = as_bool_matrix(rng.random((M, K)) < px)
    Y = as_bool_matrix(rng.random((K, N)) < py)
    return X, Y, boolean_product(X, Y)


def info_bound(M, N, K) -> float:
    """Approximate minimum number of observed entries, ``K (M + N - ln K + 1)``.

    The additive ``O(log K)`` slack is dropped.
    """
    if min(M, N, K) < 1:
        raise BoolMFError("M, N and K must be >= 1")
    return K * (M + N - math.log(K) + 1)


def observe_exact(Z, count, ch: Channel, seed) -> Observation:
    """Observe exactly ``count`` cells chosen uniformly without replacement.

    Each observed bit is drawn from the channel conditioned on not being
    erased. Entries come out in row-major order.
    """
    Z = as_bool_matrix(Z, copy=False)
    M, N = Z.shape
    if not 0 <= count <= M * N:
        raise BoolMFError(f"cannot observe {count} of {M * N} cells")
    rng = np.random.default_rng(seed)
    flat = np.sort(rng.choice(M * N, size=count, replace=False))
    rows, cols = np.divmod(flat, N)
    z = Z[rows, cols]
    ch.check_shape(M, N)
    t = ch.table[rows, cols] if ch.per_entry else ch.table[None]
    t = np.broadcast_to(t, (count, 3, 2))
    p0 = t[np.arange(count), 0, z]
    p1 = t[np.arange(count), 1, z]
    kept = p0 + p1
    if np.any(kept <= 0):
        raise BoolMFError("channel erases these cells with probability one")
    u = rng.random(count)
    values = (u >= p0 / kept).astype(np.uint8)
    return Observation((M, N), rows, cols, values)


@dataclass(frozen=True)
class SweepGrid:
    M: int
    N: int
    ranks: Sequence[int]
    obs_fractions: Sequence[float]
    repeats: int = 10
    channel: Channel = None
    seed: int = 0

    def __post_init__(self):
        if self.repeats < 1:
            raise BoolMFError("repeats must be >= 1")
        if any(not 0.0 < f <= 1.0 for f in self.obs_fractions):
            raise BoolMFError("observation fractions must lie in (0, 1]")
        if any(k < 1 for k in self.ranks):
            raise BoolMFError("ranks must be >= 1")
        if self.channel is None:
            object.__setattr__(self, "channel", Channel.symmetric(0.9))


class SweepRow(NamedTuple):
    K: int
    obs_fraction: float
    mean_error: float
    std_error: float
    mean_iters: float


class TrialResult(NamedTuple):
    error: float
    iterations: int
    converged: bool


def _trial(grid: SweepGrid, cfg: EngineConfig, K: int, fraction: float, repeat: int):
    seed = grid.seed + repeat
    p = balanced_density(K)
    # independent streams for factors, observation pattern and message init
    s_inst, s_obs, s_init = np.random.SeedSequence(seed).spawn(3)
    _, _, Z = generate_instance(grid.M, grid.N, K, p, p, s_inst)
    count = int(math.floor(fraction * grid.M * grid.N))
    obs = observe_exact(Z, count, grid.channel, s_obs)
    if len(obs) == 0:
        # nothing to run on; predict all zeros
        return TrialResult(reconstruction_error(Z, np.zeros_like(Z)), 0, False)
    init_seed = int(s_init.generate_state(1)[0])
    res = run_map(obs, Priors(), grid.channel, replace(cfg, rank=K, seed=init_seed))
    err = reconstruction_error(Z, boolean_product(res.X, res.Y))
    return TrialResult(err, res.iterations_run, res.converged)


def run_sweep(grid: SweepGrid, cfg: EngineConfig, threads: int = 1):
    """Reconstruction error over a (rank, observed fraction) grid.

    Trial ``r`` of every grid point uses seed ``grid.seed + r``. The error
    is measured on the whole matrix (observed and held-out cells). Rows come
    back in grid order whatever ``threads`` is; ``std_error`` is the
    population standard deviation over repeats.
    """
    jobs = [(K, f, r) for K in grid.ranks for f in grid.obs_fractions
            for r in range(grid.repeats)]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            trials = list(pool.map(lambda j: _trial(grid, cfg, *j), jobs))
    else:
        trials = [_trial(grid, cfg, *j) for j in jobs]

    rows = []
    for i in range(0, len(trials), grid.repeats):
        K, f, _ = jobs[i]
        chunk = trials[i:i + grid.repeats]
        errs = np.array([t.error for t in chunk])
        iters = np.array([t.iterations for t in chunk], dtype=np.float64)
        rows.append(SweepRow(K, f, float(errs.mean()), float(errs.std()), float(iters.mean())))
    return rows
