"""Sum-product message passing and decimation for marginal-MAP.

Messages are the same six log-ratio tables as the max-sum engine. With
``phi(a) = log(1 + e^a)`` the likelihood message is

    chat_k = S_k + L_O - phi(phi^-1(S_k) + L_O),   S_k = sum_{k' != k} phi(c_k')

Two forms of the constraint-factor messages are available:

``"derived"``
    ``a = phi(chat + bhat) - phi(bhat)`` and
    ``c = ahat + bhat - log(1 + e^ahat + e^bhat)``; exact sum-product for
    the AND constraint.
``"printed"``
    ``a = chat + bhat - log(1 + e^bhat + e^ahat)`` and ``c = ahat + bhat``,
    kept for comparison; it does not reproduce exact marginals on trees.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .engine import (
    EngineConfig,
    FactorizationResult,
    MessageState,
    Problem,
    _clip,
    _damped_outgoing,
    compute_marginals,
    init_messages,
    iterate,
    threshold_assign,
)
from .errors import BoolMFError
from .model import L_MAX, Channel, Observation, Priors

log = logging.getLogger(__name__)

__all__ = [
    "VARIANTS",
    "DecimationConfig",
    "phi",
    "phi_inv",
    "make_sum_product_step",
    "sum_product_sweep",
    "run_marginal_map",
]

VARIANTS = ("derived", "printed")


def phi(a):
    """``log(1 + exp(a))`` without overflow."""
    a = np.asarray(a, dtype=np.float64)
    return np.maximum(a, 0.0) + np.log1p(np.exp(-np.abs(a)))


def phi_inv(b):
    """``log(exp(b) - 1)`` for ``b > 0``; non-positive arguments give ``-L_MAX``.

    Returns ``(values, n_clamped)``.
    """
    b = np.asarray(b, dtype=np.float64)
    bad = ~(b > 0)
    safe = np.where(bad, 1.0, b)
    with np.errstate(divide="ignore"):
        out = safe + np.log1p(-np.exp(-safe))
    out = np.where(bad, -L_MAX, np.maximum(out, -L_MAX))
    return out, int(bad.sum())


def _leave_one_out_sums(v):
    """``out[:, k] = sum_{k' != k} v[:, k']`` via prefix and suffix sums."""
    n, K = v.shape
    prefix = np.zeros((n, K + 1))
    np.cumsum(v, axis=1, out=prefix[:, 1:])
    suffix = np.zeros((n, K + 1))
    np.cumsum(v[:, ::-1], axis=1, out=suffix[:, 1:])
    suffix = suffix[:, ::-1]
    return prefix[:, :K] + suffix[:, 1:]


def _chat_sumprod(c, lo):
    n, K = c.shape
    S = _leave_one_out_sums(phi(c))
    inv, clamped = phi_inv(S)
    if K == 1:
        # empty sum: phi^-1(0) = -inf by convention, not a numerical event
        clamped = 0
    chat = S + lo[:, None] - phi(inv + lo[:, None])
    return _clip(chat), clamped


def _log1p_two_exp(u, v):
    """``log(1 + e^u + e^v)``."""
    return np.logaddexp(np.logaddexp(0.0, u), v)


def make_sum_product_step(variant="derived"):
    if variant not in VARIANTS:
        raise BoolMFError(f"unknown sum-product variant {variant!r}; choose from {VARIANTS}")

    def step(st: MessageState, prob: Problem, damping: float):
        ahat, bhat = _damped_outgoing(st, prob, damping)
        chat, clamped = _chat_sumprod(st.c, prob.lo)
        if variant == "derived":
            c = st.ahat + st.bhat - _log1p_two_exp(st.ahat, st.bhat)
            a = phi(st.chat + st.bhat) - phi(st.bhat)
            b = phi(st.chat + st.ahat) - phi(st.ahat)
        else:
            c = st.ahat + st.bhat
            norm = _log1p_two_exp(st.ahat, st.bhat)
            a = st.chat + st.bhat - norm
            b = st.chat + st.ahat - norm
        delta = float(np.max(np.abs(ahat - st.ahat))) if ahat.size else 0.0
        new = MessageState(_clip(a), ahat, _clip(b), bhat, _clip(c), chat,
                           st.t + 1, st.phi_inv_clamps + clamped)
        return new, delta

    step.__name__ = f"sum_product_step_{variant}"
    return step


def sum_product_sweep(state: MessageState, obs: Observation, pr: Priors, ch: Channel,
                      cfg: EngineConfig, variant: str = "derived"):
    """One synchronous sum-product sweep; returns ``(state, max |delta ahat|)``.

    Clamped ``phi^-1`` evaluations accumulate in ``state.phi_inv_clamps``.
    """
    prob = Problem(obs, pr, ch, cfg.rank)
    prob.check(state)
    return make_sum_product_step(variant)(state, prob, cfg.damping)


@dataclass(frozen=True)
class DecimationConfig:
    batch: int = 1
    # None means as many rounds as there are variables
    max_rounds: Optional[int] = None

    def __post_init__(self):
        if self.batch < 1:
            raise BoolMFError("decimation batch must be >= 1")
        if self.max_rounds is not None and self.max_rounds < 0:
            raise BoolMFError("max_rounds must be nonnegative")


def run_marginal_map(obs: Observation, pr: Priors, ch: Channel, cfg: EngineConfig,
                     dec: DecimationConfig = DecimationConfig(),
                     variant: str = "derived") -> FactorizationResult:
    """Marginal-MAP assignment by sum-product BP with decimation.

    Each round runs sum-product to convergence (warm-started from the
    previous round), then pins the ``dec.batch`` free variables with the
    largest ``|gamma|`` to the sign of their marginal by rewriting their
    prior to exactly 0 or 1. Variables with a 0/1 prior count as already
    fixed. Ties in ``|gamma|`` go to the lowest index, X before Y.
    """
    if len(obs) == 0:
        raise BoolMFError("no observed entries: nothing constrains the factors")
    M, N = obs.shape
    K = cfg.rank
    px, py = pr.tables(M, N, K)
    p = np.concatenate([px.ravel(), py.ravel()])
    fixed = (p == 0.0) | (p == 1.0)
    max_rounds = dec.max_rounds if dec.max_rounds is not None else p.size

    step = make_sum_product_step(variant)
    state = init_messages(obs, cfg)
    rounds = nonconverged = sweeps_total = 0
    delta = 0.0

    def priors():
        return Priors(p[: M * K].reshape(M, K), p[M * K:].reshape(K, N))

    while not fixed.all() and rounds < max_rounds:
        prob = Problem(obs, priors(), ch, K)
        state, sweeps, converged, delta = iterate(state, prob, step, cfg)
        sweeps_total += sweeps
        if not converged:
            nonconverged += 1
            log.info("decimation round %d: no convergence in %d sweeps", rounds, sweeps)
        gx, gy = compute_marginals(state, obs, priors())
        gamma = np.concatenate([gx.ravel(), gy.ravel()])
        free = np.flatnonzero(~fixed)
        order = np.argsort(-np.abs(gamma[free]), kind="stable")
        chosen = free[order[: dec.batch]]
        p[chosen] = (gamma[chosen] > 0).astype(np.float64)
        fixed[chosen] = True
        rounds += 1

    final = priors()
    gx, gy = compute_marginals(state, obs, final)
    gamma = np.concatenate([gx.ravel(), gy.ravel()])
    # pinned variables report their pinned value whatever the messages say
    gamma = np.where(fixed, np.where(p > 0.5, L_MAX, -L_MAX), gamma)
    gx, gy = gamma[: M * K].reshape(M, K), gamma[M * K:].reshape(K, N)
    X, Y = threshold_assign(gx, gy)
    return FactorizationResult(
        X, Y, gx, gy, sweeps_total, nonconverged == 0, delta, state,
        rounds=rounds, nonconverged_rounds=nonconverged,
    )
