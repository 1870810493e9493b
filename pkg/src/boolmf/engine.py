"""Max-sum belief propagation for Boolean factorization and completion.

Every message is the log-ratio ``log mu(1) - log mu(0)`` of a Bernoulli
message and lives on an (observed entry, k) pair, so each table is an
``(|Omega|, K)`` array whose row index is the entry index of the
:class:`~boolmf.model.Observation`.

Message names follow the factor graph ``x - f - w - g - w - f - y``:

* ``a``    f -> x,       ``ahat`` x -> f
* ``b``    f -> y,       ``bhat`` y -> f
* ``c``    f -> w -> g,  ``chat`` g -> w -> f

One sweep advances all six tables synchronously from the previous
snapshot. Variable-to-factor messages use the belief form
``gamma - incoming`` with damping; the likelihood message reuses the two
largest ``c`` values per entry, so a sweep costs ``O(K |Omega|)``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .errors import BoolMFError, DimensionError
from .model import L_MAX, Channel, Observation, Priors, channel_log_ratios

log = logging.getLogger(__name__)

__all__ = [
    "EngineConfig",
    "MessageState",
    "FactorizationResult",
    "init_messages",
    "map_sweep",
    "compute_marginals",
    "threshold_assign",
    "run_map",
]

TABLES = ("a", "ahat", "b", "bhat", "c", "chat")

# A sweep only propagates one hop; four consecutive quiet sweeps flush the
# ahat -> c -> chat -> a -> ahat cycle before convergence is declared.
SETTLE_SWEEPS = 4


@dataclass(frozen=True)
class EngineConfig:
    rank: int
    max_iters: int = 200
    damping: float = 0.4
    eps: float = 1e-6
    seed: Optional[int] = 0
    init_scale: float = 1.0

    def __post_init__(self):
        if self.rank < 1:
            raise BoolMFError("rank must be >= 1")
        if self.max_iters < 1:
            raise BoolMFError("max_iters must be >= 1")
        if not 0.0 < self.damping <= 1.0:
            raise BoolMFError("damping must lie in (0, 1]")
        if not self.eps > 0.0:
            raise BoolMFError("eps must be positive")
        if self.init_scale < 0:
            raise BoolMFError("init_scale must be nonnegative")


@dataclass
class MessageState:
    a: np.ndarray
    ahat: np.ndarray
    b: np.ndarray
    bhat: np.ndarray
    c: np.ndarray
    chat: np.ndarray
    t: int = 0
    # number of phi^-1 evaluations clamped at a non-positive argument
    # (sum-product only)
    phi_inv_clamps: int = 0

    @property
    def shape(self):
        return self.a.shape

    @classmethod
    def zeros(cls, n_entries, rank):
        return cls(*(np.zeros((n_entries, rank)) for _ in TABLES))

    def copy(self):
        return replace(self, **{name: getattr(self, name).copy() for name in TABLES})

    def tables(self):
        return {name: getattr(self, name) for name in TABLES}

    def allclose(self, other, atol=0.0):
        return all(np.allclose(getattr(self, k), getattr(other, k), rtol=0, atol=atol)
                   for k in TABLES)


@dataclass
class FactorizationResult:
    X: np.ndarray
    Y: np.ndarray
    gamma_x: np.ndarray
    gamma_y: np.ndarray
    iterations_run: int
    converged: bool
    final_delta: float
    state: Optional[MessageState] = field(default=None, repr=False)
    # decimation bookkeeping (marginal-MAP mode)
    rounds: int = 0
    nonconverged_rounds: int = 0


class Problem:
    """Per-run constants: indices, prior logits and channel log-ratios."""

    def __init__(self, obs: Observation, pr: Priors, ch: Optional[Channel], rank: int):
        M, N = obs.shape
        K = int(rank)
        self.M, self.N, self.K = M, N, K
        self.rows = obs.rows
        self.cols = obs.cols
        lx, ly = pr.logits(M, N, K)
        self.lx = lx                      # (M, K)
        self.ly_t = np.ascontiguousarray(ly.T)  # (N, K)
        self.lo = channel_log_ratios(ch, obs) if ch is not None else np.zeros(len(obs))
        ks = np.arange(K)
        self._xcell = (self.rows[:, None] * K + ks).ravel()
        self._ycell = (self.cols[:, None] * K + ks).ravel()

    @property
    def n_entries(self):
        return len(self.rows)

    def check(self, state: MessageState):
        expect = (self.n_entries, self.K)
        for name in TABLES:
            if getattr(state, name).shape != expect:
                raise DimensionError(
                    f"message table {name} has shape {getattr(state, name).shape}, "
                    f"expected {expect}")

    def raw_marginals(self, a, b):
        """Unclipped ``(gamma_x (M,K), gamma_y^T (N,K))``.

        bincount accumulates in array order, i.e. ascending entry index.
        """
        K = self.K
        sx = np.bincount(self._xcell, weights=a.ravel(), minlength=self.M * K)
        sy = np.bincount(self._ycell, weights=b.ravel(), minlength=self.N * K)
        return self.lx + sx.reshape(self.M, K), self.ly_t + sy.reshape(self.N, K)


def _maxz(x):
    return np.maximum(x, 0.0)


def _clip(x):
    return np.clip(x, -L_MAX, L_MAX, out=x)


def init_messages(obs: Observation, cfg: EngineConfig) -> MessageState:
    """Random logistic initialization ``init_scale * (log U - log(1 - U))``."""
    n = len(obs)
    K = cfg.rank
    if cfg.init_scale == 0:
        return MessageState.zeros(n, K)
    rng = np.random.default_rng(cfg.seed)
    U = rng.random((len(TABLES), n, K))
    with np.errstate(divide="ignore"):
        vals = cfg.init_scale * (np.log(U) - np.log1p(-U))
    vals = _clip(vals)
    return MessageState(*(vals[i].copy() for i in range(len(TABLES))))


def _chat_maxsum(c, lo):
    """g -> w messages with the top-two recycling of ``max_{k' != k} c``."""
    n, K = c.shape
    pos = _maxz(c)
    S = pos.sum(axis=1, keepdims=True)
    if K == 1:
        first = np.full((n, 1), np.inf)
    else:
        r = np.arange(n)
        i1 = np.argmax(c, axis=1)
        max1 = c[r, i1]
        rest = c.copy()
        rest[r, i1] = -np.inf
        max2 = rest.max(axis=1)
        # a repeated maximum leaves max2 == max1, as the set semantics require
        other = np.where(np.arange(K)[None, :] == i1[:, None], max2[:, None], max1[:, None])
        first = _maxz(-other)
    second = S - pos + lo[:, None]
    return _clip(np.minimum(first, second))


def _damped_outgoing(st: MessageState, prob: Problem, damping: float):
    gx, gy_t = prob.raw_marginals(st.a, st.b)
    ahat = (1.0 - damping) * st.ahat + damping * (gx[prob.rows] - st.a)
    bhat = (1.0 - damping) * st.bhat + damping * (gy_t[prob.cols] - st.b)
    return _clip(ahat), _clip(bhat)


def map_step(st: MessageState, prob: Problem, damping: float):
    """One synchronous max-sum sweep on a prepared problem."""
    ahat, bhat = _damped_outgoing(st, prob, damping)
    c = _clip(np.minimum(np.minimum(st.ahat + st.bhat, st.ahat), st.bhat))
    chat = _chat_maxsum(st.c, prob.lo)
    a = _clip(_maxz(st.chat + st.bhat) - _maxz(st.bhat))
    b = _clip(_maxz(st.chat + st.ahat) - _maxz(st.ahat))
    delta = float(np.max(np.abs(ahat - st.ahat))) if ahat.size else 0.0
    return MessageState(a, ahat, b, bhat, c, chat, st.t + 1, st.phi_inv_clamps), delta


def map_sweep(state: MessageState, obs: Observation, pr: Priors, ch: Channel,
              cfg: EngineConfig):
    """Advance every message table one synchronous max-sum iteration.

    Returns the new state and the largest absolute change in ``ahat``.
    """
    prob = Problem(obs, pr, ch, cfg.rank)
    prob.check(state)
    return map_step(state, prob, cfg.damping)


def compute_marginals(state: MessageState, obs: Observation, pr: Priors):
    """Posterior log-ratio estimates ``gamma_x (M, K)`` and ``gamma_y (K, N)``."""
    M, N = obs.shape
    K = state.a.shape[1]
    if state.a.shape[0] != len(obs):
        raise DimensionError("message state does not match the observation")
    prob = Problem(obs, pr, None, K)
    gx, gy_t = prob.raw_marginals(state.a, state.b)
    gx, gy = np.clip(gx, -L_MAX, L_MAX), np.clip(gy_t.T, -L_MAX, L_MAX)
    # a hard prior pins the marginal whatever the messages say
    px, py = pr.tables(M, N, K)
    for g, p in ((gx, px), (gy, py)):
        g[p == 1.0] = L_MAX
        g[p == 0.0] = -L_MAX
    return gx, gy


def threshold_assign(gamma_x, gamma_y):
    """Bits set where the log-ratio is strictly positive."""
    X = (np.asarray(gamma_x) > 0).astype(np.uint8)
    Y = (np.asarray(gamma_y) > 0).astype(np.uint8)
    return X, Y


def iterate(state: MessageState, prob: Problem, step, cfg: EngineConfig,
            callback: Optional[Callable[[MessageState], None]] = None):
    """Run ``step`` until ``SETTLE_SWEEPS`` consecutive sweeps move ``ahat``
    by at most ``eps``, or ``max_iters`` sweeps have run.

    Returns ``(state, sweeps_run, converged, last_delta)``.
    """
    quiet = 0
    delta = float("inf")
    sweeps = 0
    for sweeps in range(1, cfg.max_iters + 1):
        state, delta = step(state, prob, cfg.damping)
        if callback is not None:
            callback(state)
        quiet = quiet + 1 if delta <= cfg.eps else 0
        if quiet >= SETTLE_SWEEPS:
            return state, sweeps, True, delta
    return state, sweeps, False, delta


def _result(state, prob, obs, pr, sweeps, converged, delta, **extra):
    gx, gy = compute_marginals(state, obs, pr)
    X, Y = threshold_assign(gx, gy)
    return FactorizationResult(X, Y, gx, gy, sweeps, converged, delta, state, **extra)


def run_map(obs: Observation, pr: Priors, ch: Channel, cfg: EngineConfig,
            callback: Optional[Callable[[MessageState], None]] = None
            ) -> FactorizationResult:
    """Approximate MAP factorization of the observed matrix by max-sum BP.

    ``callback``, if given, receives the state after every sweep.
    """
    if len(obs) == 0:
        raise BoolMFError("no observed entries: nothing constrains the factors")
    prob = Problem(obs, pr, ch, cfg.rank)
    state = init_messages(obs, cfg)
    state, sweeps, converged, delta = iterate(state, prob, map_step, cfg, callback)
    if not converged:
        log.info("max-sum did not converge in %d sweeps (delta=%.3g)", sweeps, delta)
    return _result(state, prob, obs, pr, sweeps, converged, delta)
