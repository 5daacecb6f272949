"""Gram caches of entrywise powers and implicit normal-equation assembly.

Everything here works on r x r and r x p matrices only. The link to moment
tensors is the inner-product identity

    < offdiag(v^(x)d), offdiag(a^(x)d) > = d! e_d(v * a)

(offdiag zeroes entries with any repeated index, * is the entrywise product),
so each cost order i contributes E_i matrices whose entries are e_i of
columnwise products, computable from the Gram matrices of entrywise powers
via the signed power-sum recursion. The weighted sums

    lhs = sum_i i! tau_i E_i^(A,A)        rhs = sum_i i! tau_i E_i^(A,V) pi

are the normal equations of the weight least squares; row and block solves
use the same assembly on rank-m deflated caches at one order lower.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import ConfigError
from .hyper import MAX_ORDER, order_coeffs


def power_stack(M, d):
    """Stack (M, M*M, ..., M^(*d)) by repeated multiplication, shape (d, ...)."""
    M = np.asarray(M, dtype=float)
    out = np.empty((d,) + M.shape)
    out[0] = M
    for s in range(1, d):
        out[s] = out[s - 1] * M
    return out


def power_sums(x, d):
    """p_1..p_d of a vector, p_s = sum x_i^s."""
    return power_stack(x, d).sum(axis=-1)


def esp_from_power_sums(psums):
    """e_1..e_d from p_1..p_d via e_i = (1/i) sum_s (-1)^(s-1) e_{i-s} p_s."""
    psums = np.asarray(psums, dtype=float)
    d = len(psums)
    e = np.empty(d + 1)
    e[0] = 1.0
    for i in range(1, d + 1):
        acc = 0.0
        sign = 1.0
        for s in range(1, i + 1):
            acc += sign * e[i - s] * psums[s - 1]
            sign = -sign
        e[i] = acc / i
    return e[1:]


@dataclass
class GramCache:
    """Power Gram matrices of a mean matrix against itself and the data.

    gaa[s-1] = (A^(*s))^T A^(*s), shape (d, r, r)
    gav[s-1] = (A^(*s))^T V^(*s), shape (d, r, p)

    A is owned (mutated by row replacements); V is a read-only reference.
    """

    gaa: np.ndarray
    gav: np.ndarray
    A: np.ndarray
    V: np.ndarray
    order: int

    @property
    def r(self):
        return self.A.shape[1]

    @property
    def p(self):
        return self.V.shape[1]


def build_gram_cache(A, V, d) -> GramCache:
    A = np.array(A, dtype=float)
    V = np.asarray(V, dtype=float)
    if A.ndim != 2 or V.ndim != 2 or A.shape[0] != V.shape[0]:
        raise ConfigError(
            f"A and V need matching row counts, got {A.shape} and {V.shape}"
        )
    if not 1 <= d <= MAX_ORDER:
        raise ConfigError(f"order d={d} outside supported range 1..{MAX_ORDER}")
    r, p = A.shape[1], V.shape[1]
    gaa = np.empty((d, r, r))
    gav = np.empty((d, r, p))
    Ap = A.copy()
    Vp = V.copy()
    for s in range(d):
        if s:
            Ap *= A
            Vp *= V
        gaa[s] = Ap.T @ Ap
        gav[s] = Ap.T @ Vp
    return GramCache(gaa=gaa, gav=gav, A=A, V=V, order=d)


def row_powers(vec, d):
    """(d, len) stack of entrywise powers of a single row."""
    return power_stack(np.asarray(vec, dtype=float), d)


def cache_replace_rows(cache: GramCache, rows, new_block):
    """Swap rows of A in and out of the cache by rank-m Gram updates.

    rows: index array of length m; new_block: (m, r) replacement rows.
    """
    rows = np.atleast_1d(np.asarray(rows, dtype=int))
    new_block = np.atleast_2d(np.asarray(new_block, dtype=float))
    old_pows = power_stack(cache.A[rows], cache.order)
    new_pows = power_stack(new_block, cache.order)
    v_pows = power_stack(cache.V[rows], cache.order)
    for s in range(cache.order):
        cache.gaa[s] += new_pows[s].T @ new_pows[s] - old_pows[s].T @ old_pows[s]
        cache.gav[s] += (new_pows[s] - old_pows[s]).T @ v_pows[s]
    cache.A[rows] = new_block


@dataclass
class NormalEquation:
    lhs: np.ndarray
    rhs: np.ndarray


def prep_norm_eqn(cache: GramCache, pi, order, tau, deflate_rows=None) -> NormalEquation:
    """Assemble lhs = sum_i i! tau_i E_i^(A,A) and rhs = (sum_i i! tau_i E_i^(A,V)) pi.

    pi may be a vector (p,) or a matrix (p, k) for blocked right-hand sides.
    deflate_rows, when given, is an index array; the E matrices are then built
    from the caches with those rows of A and V removed, without mutating the
    cache. order may be lower than cache.order (row solves run at d-1).
    """
    if order < 1 or order > cache.order:
        raise ConfigError(f"order {order} not in 1..{cache.order}")
    tau = np.asarray(tau, dtype=float)
    if tau.shape != (order,):
        raise ConfigError(f"tau must have shape ({order},), got {tau.shape}")
    pi = np.asarray(pi, dtype=float)
    squeeze = pi.ndim == 1
    pi2 = pi[:, None] if squeeze else pi
    if pi2.shape[0] != cache.p:
        raise ConfigError(f"pi has {pi2.shape[0]} entries, data has {cache.p} columns")

    coeffs = order_coeffs(tau)
    da = dv = None
    if deflate_rows is not None:
        rows = np.atleast_1d(np.asarray(deflate_rows, dtype=int))
        da = power_stack(cache.A[rows], order)
        dv = power_stack(cache.V[rows], order)
    lhs = kernels.normal_lhs(cache.gaa[:order], coeffs, da)
    rhs = kernels.normal_rhs(
        np.ascontiguousarray(cache.gav[:order]),
        np.ascontiguousarray(pi2),
        coeffs,
        da,
        dv,
    )
    if squeeze:
        rhs = rhs[:, 0]
    return NormalEquation(lhs=lhs, rhs=rhs)


def quad_cost(cache: GramCache, w, pi, tau):
    """Cost with the data-only constant dropped: w^T lhs w - 2 w^T rhs.

    Uses the full-order normal equations; equals the moment-matching cost up
    to the additive constant that does not depend on (w, A).
    """
    eqn = prep_norm_eqn(cache, pi, cache.order, np.asarray(tau, dtype=float))
    w = np.asarray(w, dtype=float)
    return float(w @ eqn.lhs @ w - 2.0 * w @ eqn.rhs)
