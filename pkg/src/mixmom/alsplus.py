"""Staged alternating solver with warm-up safeguards and Anderson steps.

Warm-up iterations work on randomly blocked mean rows with the solutions
clamped to the data bounding box, optionally drop the single cost order whose
removal enlarges the gradient the least, and keep the weights floored away
from zero. The main stage alternates a full means sweep with gradient-based
Anderson extrapolation (accepted only when the proposed direction aligns with
the descent direction and a backtracking line search finds a strictly lower
cost) and a weight update.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from ._rng import FIT, stream
from .als import (
    WEIGHT_FLOOR_GUARD,
    ConvergenceState,
    FitResult,
    MixtureEstimate,
    check_identifiability,
    init_estimate,
    preprocess,
    rel_change,
    unprocess_means,
    update_means,
    update_weights,
)
from .errors import ConfigError, NumericalError
from .gram import (
    GramCache,
    build_gram_cache,
    cache_replace_rows,
    prep_norm_eqn,
)
from .gradient import grad, grad_orders, implicit_cost
from .hyper import FitOptions, row_tau
from .linalg import spd_solve
from .qp import project_simplex

LINE_SEARCH_TRIALS = 10


def project_tangent(gw):
    """Remove the mean so the weight gradient lives in {x : sum x = 0}."""
    gw = np.asarray(gw, dtype=float)
    return gw - gw.mean()


def _pack(w, A):
    return np.concatenate([np.asarray(w, float).ravel(), np.asarray(A, float).ravel()])


@dataclass
class AaState:
    """History of accepted-iterate differences for Anderson extrapolation."""

    depth: int = 15
    eps: float = 1e-4
    diffs_x: list = field(default_factory=list)
    diffs_g: list = field(default_factory=list)
    last_x: np.ndarray | None = None
    last_g: np.ndarray | None = None

    def clear(self, seed_x=None, seed_g=None):
        self.diffs_x.clear()
        self.diffs_g.clear()
        self.last_x = seed_x
        self.last_g = seed_g

    def push(self, x, g):
        if self.last_x is not None:
            self.diffs_x.append(x - self.last_x)
            self.diffs_g.append(g - self.last_g)
            while len(self.diffs_x) > self.depth:
                self.diffs_x.pop(0)
                self.diffs_g.pop(0)
        self.last_x = x
        self.last_g = g


def anderson_step(state: AaState, cache: GramCache, w, pi, tau, options: FitOptions):
    """One main-stage move: means sweep, then attempted extrapolation.

    Returns (cache, w, info); the cache is replaced (not mutated) when a
    line-search point is accepted. info["kind"] is "plain" when the history
    was empty, "accelerated" on acceptance, "rejected" otherwise; rejection
    returns the sweep iterate exactly and restarts the history.
    """
    r = cache.r
    update_means(cache, w, tau)
    x_hat = _pack(w, cache.A)
    gw_hat, gA_hat = grad(w, cache, pi, tau)
    # raw gradient in the history and least squares; the tangent-projected
    # weight part enters the alignment test only
    g_hat = _pack(gw_hat, gA_hat)

    if state.last_x is None:
        state.clear(x_hat, g_hat)
        return cache, w, {"kind": "plain", "alpha": None}

    dx = state.diffs_x + [x_hat - state.last_x]
    dg = state.diffs_g + [g_hat - state.last_g]
    if len(dx) > state.depth:
        dx, dg = dx[-state.depth :], dg[-state.depth :]
    G = np.stack(dg, axis=1)
    c, *_ = np.linalg.lstsq(G, g_hat, rcond=None)
    x_prop = x_hat - np.stack(dx, axis=1) @ c

    u = x_prop - x_hat
    g_align = _pack(project_tangent(gw_hat), gA_hat)
    nu = np.linalg.norm(u)
    ng = np.linalg.norm(g_align)
    aligned = nu > 0 and ng > 0 and float(u @ -g_align) / (nu * ng) > state.eps
    if aligned:
        f_hat = implicit_cost(w, cache, pi, tau)
        alpha = 1.0
        for _ in range(LINE_SEARCH_TRIALS):
            x_try = x_hat + alpha * u
            w_try = project_simplex(x_try[:r])
            A_try = x_try[r:].reshape(cache.A.shape)
            cache_try = build_gram_cache(A_try, cache.V, cache.order)
            if implicit_cost(w_try, cache_try, pi, tau) < f_hat:
                g_try = _pack(*grad(w_try, cache_try, pi, tau))
                state.push(_pack(w_try, A_try), g_try)
                return cache_try, w_try, {"kind": "accelerated", "alpha": alpha}
            alpha *= 0.5
    state.clear(x_hat, g_hat)
    return cache, w, {"kind": "rejected", "alpha": None}


def drop_one(order_grads, tau):
    """Pick the cost order whose removal grows the total gradient norm.

    order_grads are the raw per-order gradients; J_s = tau_s * grad_s. The
    order i* maximizing || sum_{s != i} J_s || is dropped for one sweep iff
    that norm exceeds || sum_s J_s ||. Returns the 1-based order or None.
    """
    tau = np.asarray(tau, dtype=float)
    J = [tau[s] * _pack(gw, gA) for s, (gw, gA) in enumerate(order_grads)]
    total = np.sum(J, axis=0)
    base = np.linalg.norm(total)
    best, best_norm = None, base
    for i in range(len(J)):
        left_out = np.linalg.norm(total - J[i])
        if left_out > best_norm:
            best, best_norm = i + 1, left_out
    return best


def update_mean_block(cache: GramCache, rows, w, tau, box=None):
    """Joint least-squares update of a block of mean rows (shared lhs).

    Same normal equations as solve_row, with one rhs column per row; with
    box=(lo, hi) the new block is clamped to the data bounding box rows.
    """
    tau = np.asarray(tau, dtype=float)
    if cache.order < 2 or tau.shape != (cache.order,):
        raise ConfigError("block solves need a cache and tau of order d >= 2")
    rows = np.atleast_1d(np.asarray(rows, dtype=int))
    w = np.asarray(w, dtype=float)
    if np.any(w < WEIGHT_FLOOR_GUARD):
        raise NumericalError(
            f"weight below {WEIGHT_FLOOR_GUARD:g} in a block solve; keep the "
            "warm-up weight floor active or raise it"
        )
    Vb = cache.V[rows]
    pi_block = Vb.T / cache.p
    eqn = prep_norm_eqn(
        cache, pi_block, cache.order - 1, row_tau(tau), deflate_rows=rows
    )
    lhs = eqn.lhs + tau[0]
    rhs = eqn.rhs + tau[0] * Vb.mean(axis=1)
    beta = spd_solve(lhs, rhs)
    block = (beta / w[:, None]).T
    if box is not None:
        lo, hi = box
        block = np.clip(block, lo[rows, None], hi[rows, None])
    cache_replace_rows(cache, rows, block)
    return block


def fit_als_plus(V, r, d, options: FitOptions | None = None, init=None) -> FitResult:
    """Full staged fit: warm-up, then Anderson-accelerated alternation."""
    options = (options or FitOptions()).validate()
    V = np.asarray(V, dtype=float)
    n = V.shape[0]
    if r < 1:
        raise ConfigError("r must be at least 1")
    if d < 2:
        raise ConfigError("fits need order d >= 2")
    tau = options.resolved_tau(n, d)
    check_identifiability(n, r, d)

    data = preprocess(V)
    w, A0 = init_estimate(n, r, options.seed, init=init, data=data)
    cache = build_gram_cache(A0, data.values, d)
    box = (data.values.min(axis=1), data.values.max(axis=1))
    perm_rng = stream(options.seed, FIT, 1)
    pi_full = np.full(data.p, 1.0 / data.p)
    aa = AaState(depth=options.aa_depth, eps=options.aa_eps)

    state = ConvergenceState()
    result = FitResult(estimate=None, state=state)
    best = (math.inf, w.copy(), cache.A.copy())

    for t in range(options.max_iter):
        w_old, A_old = w.copy(), cache.A.copy()
        warming = t < options.warmup_steps
        if warming:
            tau_sweep = tau
            if options.drop_one:
                i_star = drop_one(grad_orders(w, cache, pi_full), tau)
                if i_star is not None:
                    tau_sweep = tau.copy()
                    tau_sweep[i_star - 1] = 0.0
            perm = perm_rng.permutation(n)
            for b0 in range(0, n, options.block_size):
                update_mean_block(
                    cache, perm[b0 : b0 + options.block_size], w, tau_sweep, box=box
                )
            w, eqn = update_weights(
                cache, tau, q=options.weight_floor, return_eqn=True
            )
        else:
            if options.aa_enabled:
                cache, w, _ = anderson_step(aa, cache, w, pi_full, tau, options)
            else:
                update_means(cache, w, tau)
            w, eqn = update_weights(cache, tau, q=0.0, return_eqn=True)

        cost = float(w @ eqn.lhs @ w - 2.0 * w @ eqn.rhs)
        state.iterations = t + 1
        state.rel_dw = rel_change(w, w_old)
        state.rel_da = rel_change(cache.A, A_old)
        result.cost_trace.append(cost)
        result.change_trace.append((state.rel_dw, state.rel_da))
        if cost < best[0]:
            best = (cost, w.copy(), cache.A.copy())
        if state.rel_dw < options.xtol and state.rel_da < options.xtol:
            state.converged = True
            break
        if (
            options.cost_tol is not None
            and not warming
            and len(result.cost_trace) >= 2
        ):
            prev, cur = result.cost_trace[-2], result.cost_trace[-1]
            if (prev - cur) / max(abs(prev), 1e-300) < options.cost_tol:
                state.converged = True
                break
    else:
        state.hit_max_iter = options.max_iter > 0
        if state.hit_max_iter:
            warnings.warn("staged solver hit max_iter without converging")
            w = best[1]
            result.estimate = MixtureEstimate(
                weights=w, means=unprocess_means(best[2], data), frame="raw"
            )
    if result.estimate is None:
        result.estimate = MixtureEstimate(
            weights=w, means=unprocess_means(cache.A, data), frame="raw"
        )
    return result
