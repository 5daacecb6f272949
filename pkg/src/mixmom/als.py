"""Alternating estimation of mixing weights and componentwise means.

The data matrix is standardized row by row (mean 0, variance 1) before any
solve; estimates live in that frame internally and are mapped back at the
end. One iteration solves every mean row against fixed weights (each row is
an unconstrained least squares on rank-1 deflated caches, one order lower),
then re-solves the weights as a simplex-constrained QP in the metric of the
weight normal equations.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from ._rng import FIT, stream
from .errors import ConfigError, IdentifiabilityWarning, NumericalError
from .gram import GramCache, build_gram_cache, cache_replace_rows, prep_norm_eqn
from .hyper import FitOptions, row_tau
from .linalg import spd_solve
from .qp import solve_simplex_qp

WEIGHT_FLOOR_GUARD = 1e-12


@dataclass
class DataMatrix:
    """Row-standardized data with the statistics needed to undo it."""

    values: np.ndarray
    center: np.ndarray
    scale: np.ndarray
    preprocessed: bool = True

    @property
    def n(self):
        return self.values.shape[0]

    @property
    def p(self):
        return self.values.shape[1]


def preprocess(V) -> DataMatrix:
    """Center each row and scale it to unit variance (1/p convention).

    Constant rows keep scale 1 so the transform stays invertible.
    """
    V = np.asarray(V, dtype=float)
    if V.ndim != 2:
        raise ConfigError(f"data must be an n x p matrix, got shape {V.shape}")
    center = V.mean(axis=1)
    var = V.var(axis=1)
    constant = var <= 1e-24 * (1.0 + center**2)
    scale = np.where(constant, 1.0, np.sqrt(var))
    values = (V - center[:, None]) / scale[:, None]
    return DataMatrix(values=values, center=center, scale=scale)


def unprocess_means(A_hat, data: DataMatrix):
    return data.scale[:, None] * np.asarray(A_hat, dtype=float) + data.center[:, None]


def to_hat_frame(A_raw, data: DataMatrix):
    return (np.asarray(A_raw, dtype=float) - data.center[:, None]) / data.scale[:, None]


@dataclass
class MixtureEstimate:
    weights: np.ndarray
    means: np.ndarray
    frame: str = "raw"


@dataclass
class ConvergenceState:
    iterations: int = 0
    rel_dw: float = math.inf
    rel_da: float = math.inf
    converged: bool = False
    hit_max_iter: bool = False


@dataclass
class FitResult:
    estimate: MixtureEstimate
    state: ConvergenceState
    cost_trace: list = field(default_factory=list)
    change_trace: list = field(default_factory=list)


def means_uniqueness_bound(n, d):
    return math.comb((n - 1) // 2, d // 2)


def check_identifiability(n, r, d):
    bound = means_uniqueness_bound(n, d)
    if r > bound:
        warnings.warn(
            f"r={r} components exceed the mean-uniqueness bound "
            f"C(floor((n-1)/2), floor(d/2)) = {bound} for n={n}, d={d}; "
            "recovered parameters may not be unique",
            category=IdentifiabilityWarning,
            stacklevel=3,
        )


def update_weights(cache: GramCache, tau, q=0.0, return_eqn=False):
    """Weight update: unconstrained normal-equation solve, then the QP
    projection onto the simplex (optionally floored at q/r) in the L metric."""
    pi = np.full(cache.p, 1.0 / cache.p)
    eqn = prep_norm_eqn(cache, pi, cache.order, tau)
    if cache.r == 1:
        w = np.ones(1)
    else:
        w0 = spd_solve(eqn.lhs, eqn.rhs)
        w = solve_simplex_qp(eqn.lhs, w0, q=q)
    if return_eqn:
        return w, eqn
    return w


def solve_row(cache: GramCache, k, w, pi, data_mean_entry, tau, update_cache=True):
    """Least-squares update of mean row k with all other rows held fixed.

    Builds the deflated normal equations at order d-1 with weights
    (i+1) tau_{i+1}, adds the first-order term tau_1 to every lhs entry and
    tau_1 * data_mean_entry to the rhs, solves for beta = w * row, and divides
    by w. With update_cache the caches absorb the new row (rank-1 swap).
    """
    tau = np.asarray(tau, dtype=float)
    if cache.order < 2 or tau.shape != (cache.order,):
        raise ConfigError("row solves need a cache and tau of order d >= 2")
    w = np.asarray(w, dtype=float)
    if np.any(w < WEIGHT_FLOOR_GUARD):
        raise NumericalError(
            f"weight below {WEIGHT_FLOOR_GUARD:g} in a row solve; keep the "
            "warm-up weight floor active or raise it"
        )
    eqn = prep_norm_eqn(cache, pi, cache.order - 1, row_tau(tau), deflate_rows=[k])
    lhs = eqn.lhs + tau[0]
    rhs = eqn.rhs + tau[0] * data_mean_entry
    beta = spd_solve(lhs, rhs)
    new_row = beta / w
    if update_cache:
        cache_replace_rows(cache, [k], new_row[None, :])
    return new_row


def update_means(cache: GramCache, w, tau):
    """One full sweep of row solves, k = 1..n, caches updated in place."""
    p = cache.p
    for k in range(cache.A.shape[0]):
        row = cache.V[k]
        solve_row(cache, k, w, row / p, row.mean(), tau, update_cache=True)
    return cache.A


def rel_change(new, old):
    denom = np.linalg.norm(old)
    if denom == 0.0:
        return float(np.linalg.norm(new))
    return float(np.linalg.norm(np.asarray(new) - np.asarray(old)) / denom)


def init_estimate(n, r, seed, init=None, data=None):
    """Uniform weights and standard-normal means in the standardized frame.

    A user-supplied init is translated into that frame when tagged raw.
    """
    if init is not None:
        w = np.asarray(init.weights, dtype=float).copy()
        A = np.asarray(init.means, dtype=float)
        A = to_hat_frame(A, data) if init.frame == "raw" else A.copy()
        if w.shape != (r,) or A.shape != (n, r):
            raise ConfigError("init estimate has mismatched shapes")
        return w, A
    rng = stream(seed, FIT, 0)
    return np.full(r, 1.0 / r), rng.standard_normal((n, r))


def solve_mean_and_weight(V, r, d, options: FitOptions | None = None, init=None) -> FitResult:
    """Plain alternating solver: means sweep then weight update until the
    relative change in both falls below xtol or max_iter is reached."""
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
    state = ConvergenceState()
    result = FitResult(estimate=None, state=state)
    best = (math.inf, w, cache.A.copy())

    for t in range(options.max_iter):
        w_old, A_old = w.copy(), cache.A.copy()
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
    else:
        state.hit_max_iter = options.max_iter > 0
        if state.hit_max_iter:
            warnings.warn("alternating solver hit max_iter without converging")
            w, A_fin = best[1], best[2]
            result.estimate = MixtureEstimate(
                weights=w, means=unprocess_means(A_fin, data), frame="raw"
            )
    if result.estimate is None:
        result.estimate = MixtureEstimate(
            weights=w, means=unprocess_means(cache.A, data), frame="raw"
        )
    return result
