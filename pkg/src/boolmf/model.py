"""Probabilistic model: separable Bernoulli priors on the factors, a
per-entry noisy erasure channel, sparse observations, and the exact
unnormalized log-posterior.
"""
from __future__ import annotations

import numpy as np

from .core import as_bool_matrix, boolean_product
from .errors import BoolMFError, DimensionError, InvalidChannelError

__all__ = [
    "L_MAX",
    "ERASED",
    "clamped_logit",
    "Priors",
    "Channel",
    "Observation",
    "channel_log_ratio",
    "channel_log_ratios",
    "apply_channel",
    "posterior_log_score",
]

# Stand-in for +/- infinity in log-ratios (hard priors, noiseless channels).
L_MAX = 1e6

# Marker for an erased cell in dense observation arrays.
ERASED = -1

# Row of the channel table holding P(erased | z).
_ERASED_ROW = 2


def clamped_logit(p):
    """``log(p) - log(1 - p)`` clipped to ``[-L_MAX, L_MAX]``; 0 and 1 map to the bounds."""
    p = np.asarray(p, dtype=np.float64)
    with np.errstate(divide="ignore"):
        out = np.log(p) - np.log1p(-p)
    return np.clip(out, -L_MAX, L_MAX)


def _as_prob(p, name):
    arr = np.asarray(p, dtype=np.float64)
    if not np.all(np.isfinite(arr)) or np.any(arr < 0) or np.any(arr > 1):
        raise BoolMFError(f"{name} must hold probabilities in [0, 1]")
    return arr


class Priors:
    """Independent Bernoulli priors ``P(x[m,k]=1)`` and ``P(y[k,n]=1)``.

    Each of ``px`` and ``py`` is either a scalar shared by every entry or a
    full table (``M x K`` and ``K x N``). Probabilities of exactly 0 or 1
    pin the corresponding bit.
    """

    def __init__(self, px=0.5, py=0.5):
        self.px = _as_prob(px, "px")
        self.py = _as_prob(py, "py")
        for name, arr in (("px", self.px), ("py", self.py)):
            if arr.ndim not in (0, 2):
                raise DimensionError(f"{name} must be a scalar or a 2-D table")
            arr.setflags(write=False)

    @classmethod
    def uniform(cls, p=0.5):
        return cls(p, p)

    def tables(self, M, N, K):
        """Broadcast to full ``(M, K)`` and ``(K, N)`` tables, checking shapes."""
        if self.px.ndim == 2 and self.px.shape != (M, K):
            raise DimensionError(f"px table has shape {self.px.shape}, expected {(M, K)}")
        if self.py.ndim == 2 and self.py.shape != (K, N):
            raise DimensionError(f"py table has shape {self.py.shape}, expected {(K, N)}")
        return (np.broadcast_to(self.px, (M, K)).copy(),
                np.broadcast_to(self.py, (K, N)).copy())

    def logits(self, M, N, K):
        px, py = self.tables(M, N, K)
        return clamped_logit(px), clamped_logit(py)

    def __repr__(self):
        return f"Priors(px={self.px!r}, py={self.py!r})"


class Channel:
    """Conditional table ``P(o | z)`` for ``o`` in {0, 1, erased} and ``z`` in {0, 1}.

    ``table`` has shape ``(3, 2)`` (shared by every cell) or ``(M, N, 3, 2)``
    (one table per cell); index order is ``[..., o, z]`` with ``o = 2``
    meaning erased.
    """

    def __init__(self, table):
        table = np.array(table, dtype=np.float64)
        if table.shape[-2:] != (3, 2) or table.ndim not in (2, 4):
            raise InvalidChannelError(
                f"channel table must have shape (3, 2) or (M, N, 3, 2), got {table.shape}")
        if not np.all(np.isfinite(table)) or np.any(table < 0):
            raise InvalidChannelError("channel probabilities must be finite and nonnegative")
        if np.any(np.abs(table.sum(axis=-2) - 1.0) > 1e-12):
            raise InvalidChannelError("P(. | z) must sum to 1 for each z")
        table.setflags(write=False)
        self.table = table

    @classmethod
    def symmetric(cls, c, erasure=0.0):
        """Flip with probability ``1 - c`` and erase independently of ``z``."""
        if not 0.0 <= c <= 1.0 or not 0.0 <= erasure <= 1.0:
            raise InvalidChannelError("c and erasure must lie in [0, 1]")
        keep = 1.0 - erasure
        return cls([[c * keep, (1.0 - c) * keep],
                    [(1.0 - c) * keep, c * keep],
                    [erasure, erasure]])

    @classmethod
    def noiseless(cls, erasure=0.0):
        return cls.symmetric(1.0, erasure)

    @classmethod
    def from_values(cls, values):
        """Build from six numbers ordered
        ``P(0|0), P(1|0), P(erased|0), P(0|1), P(1|1), P(erased|1)``."""
        values = [float(v) for v in values]
        if len(values) != 6:
            raise InvalidChannelError(f"expected 6 channel values, got {len(values)}")
        return cls(np.array(values).reshape(2, 3).T)

    @property
    def per_entry(self):
        return self.table.ndim == 4

    def conditionals(self, m, n):
        """The ``(3, 2)`` table for cell ``(m, n)``."""
        return self.table[m, n] if self.per_entry else self.table

    def check_shape(self, M, N):
        if self.per_entry and self.table.shape[:2] != (M, N):
            raise DimensionError(
                f"per-entry channel is {self.table.shape[:2]}, observation grid is {(M, N)}")

    def __repr__(self):
        if self.per_entry:
            return f"Channel(<per-entry {self.table.shape[0]}x{self.table.shape[1]}>)"
        return f"Channel({self.table.T.ravel().tolist()!r})"


class Observation:
    """Observed cells of an ``M x N`` grid: parallel arrays of row, column and bit.

    The position of an entry in these arrays is its entry index; the engine
    sums over entries in that order. Erased cells are simply absent.
    """

    def __init__(self, shape, rows=(), cols=(), values=()):
        M, N = (int(s) for s in shape)
        if M < 0 or N < 0:
            raise DimensionError(f"invalid grid shape {shape}")
        rows = np.array(rows, dtype=np.int64).reshape(-1)
        cols = np.array(cols, dtype=np.int64).reshape(-1)
        values = np.array(values, dtype=np.int64).reshape(-1)
        if not (len(rows) == len(cols) == len(values)):
            raise DimensionError("rows, cols and values must have equal length")
        if len(rows):
            if rows.min() < 0 or rows.max() >= M or cols.min() < 0 or cols.max() >= N:
                raise BoolMFError("observation index out of range")
            if not np.isin(values, (0, 1)).all():
                raise BoolMFError("observed values must be 0 or 1")
            flat = rows * N + cols
            if len(np.unique(flat)) != len(flat):
                raise BoolMFError("duplicate observed cell")
        self.shape = (M, N)
        self.rows = rows
        self.cols = cols
        self.values = values.astype(np.uint8)
        for arr in (self.rows, self.cols, self.values):
            arr.setflags(write=False)

    @classmethod
    def from_dense(cls, O):
        """From a dense array with 0, 1 or :data:`ERASED` per cell (row-major order)."""
        O = np.asarray(O)
        if O.ndim != 2:
            raise DimensionError("dense observation must be 2-D")
        rows, cols = np.nonzero(O != ERASED)
        return cls(O.shape, rows, cols, O[rows, cols])

    @classmethod
    def from_triples(cls, shape, triples):
        """From ``(m, n, v)`` triples; ``v`` of ``None`` or :data:`ERASED` is dropped."""
        kept = [(m, n, v) for m, n, v in triples if v is not None and v != ERASED]
        if not kept:
            return cls(shape)
        rows, cols, values = zip(*kept)
        return cls(shape, rows, cols, values)

    @classmethod
    def full(cls, Z):
        """Every cell of ``Z`` observed, no noise."""
        return cls.from_dense(as_bool_matrix(Z).astype(np.int64))

    def __len__(self):
        return len(self.rows)

    def __iter__(self):
        return zip(self.rows.tolist(), self.cols.tolist(), self.values.tolist())

    def __eq__(self, other):
        if not isinstance(other, Observation):
            return NotImplemented
        return (self.shape == other.shape
                and np.array_equal(self.rows, other.rows)
                and np.array_equal(self.cols, other.cols)
                and np.array_equal(self.values, other.values))

    def __repr__(self):
        return f"Observation(shape={self.shape}, entries={len(self)})"

    def mask(self):
        """Boolean ``M x N`` array, true on observed cells."""
        out = np.zeros(self.shape, dtype=bool)
        out[self.rows, self.cols] = True
        return out

    def to_dense(self):
        """Dense ``int64`` array with :data:`ERASED` on unobserved cells."""
        out = np.full(self.shape, ERASED, dtype=np.int64)
        out[self.rows, self.cols] = self.values
        return out


def _log_ratio(p1, p0):
    p1 = np.asarray(p1, dtype=np.float64)
    p0 = np.asarray(p0, dtype=np.float64)
    if np.any((p1 == 0) & (p0 == 0)):
        raise InvalidChannelError("observed symbol has zero probability under both z=0 and z=1")
    with np.errstate(divide="ignore"):
        out = np.log(p1) - np.log(p0)
    return np.clip(out, -L_MAX, L_MAX)


def channel_log_ratio(ch: Channel, m: int, n: int, o: int) -> float:
    """``log P(o|z=1) - log P(o|z=0)`` for one observed cell, clipped to ``+/-L_MAX``."""
    if o not in (0, 1):
        raise BoolMFError("erased cells carry no log-ratio; o must be 0 or 1")
    t = ch.conditionals(m, n)
    return float(_log_ratio(t[o, 1], t[o, 0]))


def channel_log_ratios(ch: Channel, obs: Observation) -> np.ndarray:
    """Vector of channel log-ratios, one per observed entry."""
    ch.check_shape(*obs.shape)
    v = obs.values.astype(np.int64)
    if ch.per_entry:
        t = ch.table[obs.rows, obs.cols]
        p1 = t[np.arange(len(v)), v, 1]
        p0 = t[np.arange(len(v)), v, 0]
    else:
        p1 = ch.table[v, 1]
        p0 = ch.table[v, 0]
    return _log_ratio(p1, p0)


def apply_channel(Z, ch: Channel, seed) -> Observation:
    """Pass every cell of ``Z`` through the channel independently."""
    Z = as_bool_matrix(Z, copy=False)
    ch.check_shape(*Z.shape)
    rng = np.random.default_rng(seed)
    u = rng.random(Z.shape)
    M, N = Z.shape
    if ch.per_entry:
        t = ch.table
        mi, ni = np.indices(Z.shape)
        p0 = t[mi, ni, 0, Z]
        p1 = t[mi, ni, 1, Z]
    else:
        p0 = ch.table[0][Z]
        p1 = ch.table[1][Z]
    O = np.where(u < p0, 0, np.where(u < p0 + p1, 1, ERASED))
    return Observation.from_dense(O)


def posterior_log_score(X, Y, obs: Observation, pr: Priors, ch: Channel) -> float:
    """Unnormalized log-posterior of ``(X, Y)``: log-priors plus channel log-likelihood.

    An impossible assignment (a zero prior or channel probability) scores
    ``-L_MAX``.
    """
    X = as_bool_matrix(X, copy=False)
    Y = as_bool_matrix(Y, copy=False)
    M, K = X.shape
    if Y.shape[0] != K or obs.shape != (M, Y.shape[1]):
        raise DimensionError(
            f"X {X.shape}, Y {Y.shape} and observation {obs.shape} are inconsistent")
    N = Y.shape[1]
    ch.check_shape(M, N)
    px, py = pr.tables(M, N, K)
    Z = boolean_product(X, Y)
    with np.errstate(divide="ignore"):
        total = np.sum(np.log(np.where(X == 1, px, 1.0 - px)))
        total += np.sum(np.log(np.where(Y == 1, py, 1.0 - py)))
        for m, n, o in obs:
            total += np.log(ch.conditionals(m, n)[o, Z[m, n]])
    if not np.isfinite(total):
        return -L_MAX
    return float(total)
