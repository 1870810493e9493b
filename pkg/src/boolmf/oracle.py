"""Exhaustive MAP and exact marginals for desk-sized instances.

Assignments are enumerated by plain binary counting over the
``K * (M + N)`` bits (X row-major, then Y row-major) and scored in
vectorized chunks.
"""
from __future__ import annotations

import numpy as np

from .errors import DimensionError, InstanceTooLargeError
from .model import L_MAX, Channel, Observation, Priors

__all__ = ["MAX_ORACLE_BITS", "exact_map", "exact_marginals", "score_assignments"]

MAX_ORACLE_BITS = 24
_CHUNK = 1 << 15
_TIE_TOL = 1e-9


def _check(obs, K):
    M, N = obs.shape
    if K < 1:
        raise DimensionError("rank must be >= 1")
    nbits = K * (M + N)
    if nbits > MAX_ORACLE_BITS:
        raise InstanceTooLargeError(
            f"exhaustive search needs 2^{nbits} assignments; "
            f"limit is K*(M+N) <= {MAX_ORACLE_BITS}")
    return M, N, nbits


def _log_tables(obs, K, pr, ch):
    M, N = obs.shape
    ch.check_shape(M, N)
    px, py = pr.tables(M, N, K)
    p1 = np.concatenate([px.ravel(), py.ravel()])
    with np.errstate(divide="ignore"):
        lp1 = np.log(p1)
        lp0 = np.log1p(-p1)
        t = np.stack([ch.conditionals(m, n)[o] for m, n, o in obs]) if len(obs) \
            else np.zeros((0, 2))
        lo = np.log(t)  # (|Omega|, 2): log P(o | z=0), log P(o | z=1)
    return lp0, lp1, lo


def _decode(codes, M, N, K):
    nbits = K * (M + N)
    bits = ((codes[:, None] >> np.arange(nbits, dtype=np.int64)) & 1).astype(np.uint8)
    X = bits[:, : M * K].reshape(-1, M, K)
    Y = bits[:, M * K:].reshape(-1, K, N)
    return bits, X, Y


def score_assignments(codes, obs, K, tables):
    """Log-posterior of each encoded assignment; ``-inf`` where impossible."""
    M, N = obs.shape
    lp0, lp1, lo = tables
    bits, X, Y = _decode(np.asarray(codes, dtype=np.int64), M, N, K)
    score = np.where(bits == 1, lp1, lp0).sum(axis=1)
    if len(obs):
        # z[a, omega] = OR_k x[a, m_omega, k] AND y[a, k, n_omega]
        z = (X[:, obs.rows, :] & np.swapaxes(Y[:, :, obs.cols], 1, 2)).any(axis=2)
        score = score + np.where(z, lo[:, 1], lo[:, 0]).sum(axis=1)
    return score


def _chunks(nbits):
    total = 1 << nbits
    for start in range(0, total, _CHUNK):
        yield np.arange(start, min(start + _CHUNK, total), dtype=np.int64)


def _canonical(X, Y):
    """Sort the K (column of X, row of Y) pairs so column permutations compare equal."""
    pairs = sorted(zip(map(bytes, X.T), map(bytes, Y)))
    return tuple(pairs)


def exact_map(obs: Observation, K: int, pr: Priors, ch: Channel):
    """Brute-force MAP.

    Returns ``(X, Y, best_score, is_unique)``; uniqueness is judged up to
    permuting the K components. An impossible best assignment scores
    ``-L_MAX``.
    """
    M, N, nbits = _check(obs, K)
    tables = _log_tables(obs, K, pr, ch)
    best = -np.inf
    best_codes = []
    for codes in _chunks(nbits):
        s = score_assignments(codes, obs, K, tables)
        top = s.max()
        if top > best + _TIE_TOL:
            best = top
            best_codes = list(codes[s >= top - _TIE_TOL])
        elif top >= best - _TIE_TOL:
            best_codes.extend(codes[s >= best - _TIE_TOL])
    if not np.isfinite(best):
        # every assignment impossible; fall back to the first
        best_codes = [0]
    _, Xs, Ys = _decode(np.array(best_codes, dtype=np.int64), M, N, K)
    forms = {_canonical(X, Y) for X, Y in zip(Xs, Ys)}
    score = float(best) if np.isfinite(best) else -L_MAX
    return Xs[0].copy(), Ys[0].copy(), score, len(forms) == 1


def _logaddexp_reduce(acc, vals, mask):
    v = np.where(mask, vals[:, None], -np.inf)
    return np.logaddexp(acc, np.logaddexp.reduce(v, axis=0))


def exact_marginals(obs: Observation, K: int, pr: Priors, ch: Channel):
    """Exact posterior log-ratios ``(gamma_x (M,K), gamma_y (K,N))``, clipped to ``+/-L_MAX``."""
    M, N, nbits = _check(obs, K)
    tables = _log_tables(obs, K, pr, ch)
    on = np.full(nbits, -np.inf)
    off = np.full(nbits, -np.inf)
    for codes in _chunks(nbits):
        s = score_assignments(codes, obs, K, tables)
        bits = ((codes[:, None] >> np.arange(nbits, dtype=np.int64)) & 1).astype(bool)
        on = _logaddexp_reduce(on, s, bits)
        off = _logaddexp_reduce(off, s, ~bits)
    with np.errstate(invalid="ignore"):
        gamma = on - off
    gamma = np.where(np.isneginf(off) & ~np.isneginf(on), L_MAX, gamma)
    gamma = np.where(np.isneginf(on) & ~np.isneginf(off), -L_MAX, gamma)
    gamma = np.nan_to_num(gamma, nan=0.0)
    gamma = np.clip(gamma, -L_MAX, L_MAX)
    return gamma[: M * K].reshape(M, K), gamma[M * K:].reshape(K, N)
