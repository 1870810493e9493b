"""Slow, literal reference implementations used as test oracles.

Nothing here shares code with the package beyond the plain data types:
message updates loop over every (entry, k) and recompute each leave-one-out
sum and max from scratch, and enumeration walks ``itertools.product``.
"""
import itertools
import math

import numpy as np

L_MAX = 1e6


def _logit(p):
    if p <= 0.0:
        return -L_MAX
    if p >= 1.0:
        return L_MAX
    return math.log(p) - math.log1p(-p)


def _clip(v):
    return min(max(v, -L_MAX), L_MAX)


def _maxz(v):
    return max(0.0, v)


def _table(p, shape):
    return np.broadcast_to(np.asarray(p, dtype=float), shape)


def _cond(ch, m, n):
    t = np.asarray(ch.table, dtype=float)
    return t[m, n] if t.ndim == 4 else t


def log_ratio(ch, m, n, o):
    t = _cond(ch, m, n)
    p1, p0 = t[o, 1], t[o, 0]
    if p1 == 0.0 and p0 == 0.0:
        raise ValueError("both conditionals zero")
    if p1 == 0.0:
        return -L_MAX
    if p0 == 0.0:
        return L_MAX
    return _clip(math.log(p1) - math.log(p0))


def _entries(obs):
    return [(int(m), int(n), int(v)) for m, n, v in zip(obs.rows, obs.cols, obs.values)]


def _outgoing(state, obs, px, py, lam):
    """Damped x->f and y->f messages from the literal leave-one-out sums."""
    ent = _entries(obs)
    n_ent, K = state.a.shape
    ahat = np.zeros((n_ent, K))
    bhat = np.zeros((n_ent, K))
    for i, (m, n, _) in enumerate(ent):
        for k in range(K):
            sa = _logit(px[m, k])
            sb = _logit(py[k, n])
            for j, (m2, n2, _) in enumerate(ent):
                if j == i:
                    continue
                if m2 == m:
                    sa += state.a[j, k]
                if n2 == n:
                    sb += state.b[j, k]
            ahat[i, k] = _clip((1 - lam) * state.ahat[i, k] + lam * sa)
            bhat[i, k] = _clip((1 - lam) * state.bhat[i, k] + lam * sb)
    return ahat, bhat


def naive_map_sweep(state, obs, px, py, ch, lam):
    """One synchronous max-sum sweep, written entry by entry.

    Returns the six new tables as a dict.
    """
    M, N = obs.shape
    n_ent, K = state.a.shape
    px = _table(px, (M, K))
    py = _table(py, (K, N))
    ent = _entries(obs)
    ahat, bhat = _outgoing(state, obs, px, py, lam)
    a = np.zeros((n_ent, K))
    b = np.zeros((n_ent, K))
    c = np.zeros((n_ent, K))
    chat = np.zeros((n_ent, K))
    for i, (m, n, o) in enumerate(ent):
        lo = log_ratio(ch, m, n, o)
        for k in range(K):
            ah, bh, ch_ = state.ahat[i, k], state.bhat[i, k], state.chat[i, k]
            c[i, k] = _clip(min(ah + bh, ah, bh))
            others = [state.c[i, kk] for kk in range(K) if kk != k]
            first = _maxz(-max(others)) if others else math.inf
            second = sum(_maxz(v) for v in others) + lo
            chat[i, k] = _clip(min(first, second))
            a[i, k] = _clip(_maxz(ch_ + bh) - _maxz(bh))
            b[i, k] = _clip(_maxz(ch_ + ah) - _maxz(ah))
    return dict(a=a, ahat=ahat, b=b, bhat=bhat, c=c, chat=chat)


def _phi(v):
    return math.log1p(math.exp(v)) if v < 30 else v + math.log1p(math.exp(-v))


def _phi_inv(v):
    if v <= 0:
        return -L_MAX
    return v + math.log(-math.expm1(-v))


def naive_sum_product_sweep(state, obs, px, py, ch, lam):
    """One synchronous sum-product sweep (exact AND-factor messages)."""
    M, N = obs.shape
    n_ent, K = state.a.shape
    px = _table(px, (M, K))
    py = _table(py, (K, N))
    ent = _entries(obs)
    ahat, bhat = _outgoing(state, obs, px, py, lam)
    a = np.zeros((n_ent, K))
    b = np.zeros((n_ent, K))
    c = np.zeros((n_ent, K))
    chat = np.zeros((n_ent, K))
    for i, (m, n, o) in enumerate(ent):
        lo = log_ratio(ch, m, n, o)
        for k in range(K):
            ah, bh, ch_ = state.ahat[i, k], state.bhat[i, k], state.chat[i, k]
            # w = x AND y; P(w=1) / P(w=0) from the incoming x and y beliefs
            c[i, k] = _clip(ah + bh - math.log(1 + math.exp(ah) + math.exp(bh)))
            s = sum(_phi(state.c[i, kk]) for kk in range(K) if kk != k)
            chat[i, k] = _clip(s + lo - _phi(_phi_inv(s) + lo))
            a[i, k] = _clip(_phi(ch_ + bh) - _phi(bh))
            b[i, k] = _clip(_phi(ch_ + ah) - _phi(ah))
    return dict(a=a, ahat=ahat, b=b, bhat=bhat, c=c, chat=chat)


def brute_scores(obs, K, px, py, ch):
    """Yield ``(X, Y, log-posterior)`` for every assignment."""
    M, N = obs.shape
    px = _table(px, (M, K))
    py = _table(py, (K, N))
    ent = _entries(obs)
    for bits in itertools.product((0, 1), repeat=K * (M + N)):
        X = np.array(bits[: M * K]).reshape(M, K)
        Y = np.array(bits[M * K:]).reshape(K, N)
        s = 0.0
        for p, v in itertools.chain(zip(px.ravel(), X.ravel()), zip(py.ravel(), Y.ravel())):
            q = p if v else 1 - p
            s += math.log(q) if q > 0 else -math.inf
        for m, n, o in ent:
            z = int(any(X[m, k] and Y[k, n] for k in range(K)))
            q = _cond(ch, m, n)[o, z]
            s += math.log(q) if q > 0 else -math.inf
        yield X, Y, s


def brute_map_score(obs, K, px, py, ch):
    return max(s for _, _, s in brute_scores(obs, K, px, py, ch))


def brute_marginals(obs, K, px, py, ch):
    """Exact posterior log-ratios by summing probabilities directly."""
    M, N = obs.shape
    on = np.zeros(K * (M + N))
    off = np.zeros(K * (M + N))
    for X, Y, s in brute_scores(obs, K, px, py, ch):
        w = math.exp(s)
        bits = np.concatenate([X.ravel(), Y.ravel()]).astype(bool)
        on[bits] += w
        off[~bits] += w
    g = np.log(on) - np.log(off)
    return g[: M * K].reshape(M, K), g[M * K:].reshape(K, N)
