"""Implicit cost and gradient evaluation.

The off-diagonal moment cost expands, order by order, into partition sums

    f_i = sum_{lam |- i} N_lam < w, K_lam w - 2 H_lam pi > + const,

where K_lam / H_lam are entrywise products of power Gram matrices picked by
the parts of lam and N_lam are the signed integer coefficients from the
power-sum expansion of i! e_i. Differentiating a single Gram-product term in
the mean matrix gives, per part position t,

    lam_t (A^(lam_t - 1) W) * [ (Y^(lam_t) S) @ prod_{m != t} Gram_m ]

with Y the other factor (A or V), S its column scaling (weights or pi), and
an extra factor 2 when both factors are A. Everything is assembled from the
r x r and r x p caches; the only data-sized products are chunked so extra
memory stays O(p r).
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigError
from .gram import GramCache, power_stack
from .partitions import partition_coefficients, partitions


def _a_power_scaled(A_pows, w, power):
    """A^(*(power)) with columns scaled by w; power 0 is the all-ones matrix."""
    n, r = A_pows.shape[1:]
    if power == 0:
        return np.broadcast_to(w, (n, r)).copy()
    return A_pows[power - 1] * w


def _chunked_data_matmul(V, pi, power, M):
    """(V^(*power) Diag(pi)) @ M without materializing n x p powers.

    M is p x r; the column chunk width is chosen so scratch stays near p*r.
    """
    n, p = V.shape
    r = M.shape[1]
    chunk = int(min(p, max(64, (r * p) // max(n, 1))))
    out = np.zeros((n, r))
    for j0 in range(0, p, chunk):
        sl = slice(j0, min(j0 + chunk, p))
        Vb = V[:, sl]
        Pb = Vb.copy()
        for _ in range(power - 1):
            Pb *= Vb
        out += (Pb * pi[sl]) @ M[sl]
    return out


def _leave_one_out(stack, lam, t, transpose=False):
    """Entrywise product of stack[lam_m - 1] over positions m != t."""
    first = stack[0].T if transpose else stack[0]
    out = np.ones_like(first)
    for m, part in enumerate(lam):
        if m == t:
            continue
        out = out * (stack[part - 1].T if transpose else stack[part - 1])
    return out


def _lam_matrices(cache, lam):
    K = np.ones((cache.r, cache.r))
    H = np.ones((cache.r, cache.p))
    for part in lam:
        K = K * cache.gaa[part - 1]
        H = H * cache.gav[part - 1]
    return K, H


def implicit_cost(w, cache: GramCache, pi, tau):
    """Moment-matching cost via the partition expansion, constant dropped."""
    w = np.asarray(w, dtype=float)
    pi = np.asarray(pi, dtype=float)
    tau = np.asarray(tau, dtype=float)
    if len(tau) > cache.order:
        raise ConfigError("tau longer than the cache order")
    coeffs = partition_coefficients(len(tau))
    total = 0.0
    for i in range(1, len(tau) + 1):
        if tau[i - 1] == 0:
            continue
        acc = 0.0
        for lam in partitions(i):
            K, H = _lam_matrices(cache, lam)
            acc += coeffs[lam] * float(w @ K @ w - 2.0 * w @ (H @ pi))
        total += tau[i - 1] * acc
    return total


def grad_orders(w, cache: GramCache, pi):
    """Per-order raw gradients [(gw_1, gA_1), ..., (gw_d, gA_d)], unweighted.

    Order s hosts the partition sum over lam |- s; multiply entry s-1 by
    tau_s and add to get the gradient of the full cost.
    """
    w = np.asarray(w, dtype=float)
    pi = np.asarray(pi, dtype=float)
    d = cache.order
    n, r = cache.A.shape
    coeffs = partition_coefficients(d)
    A_pows = power_stack(cache.A, d)
    out = []
    for s in range(1, d + 1):
        gw = np.zeros(r)
        gA = np.zeros((n, r))
        for lam in partitions(s):
            N = coeffs[lam]
            K, H = _lam_matrices(cache, lam)
            gw += N * (2.0 * (K @ w) - 2.0 * (H @ pi))
            for t, part in enumerate(lam):
                left = _a_power_scaled(A_pows, w, part - 1)
                MA = _leave_one_out(cache.gaa, lam, t)
                termA = left * (_a_power_scaled(A_pows, w, part) @ MA)
                MV = _leave_one_out(cache.gav, lam, t, transpose=True)
                termV = left * _chunked_data_matmul(cache.V, pi, part, MV)
                gA += N * part * (2.0 * termA - 2.0 * termV)
        out.append((gw, gA))
    return out


def grad(w, cache: GramCache, pi, tau):
    """Gradient of the implicit cost in (w, A): tau-weighted per-order sum."""
    tau = np.asarray(tau, dtype=float)
    if len(tau) != cache.order:
        raise ConfigError("tau length must match the cache order")
    orders = grad_orders(w, cache, pi)
    gw = np.zeros(cache.r)
    gA = np.zeros(cache.A.shape)
    for s, (gws, gAs) in enumerate(orders, start=1):
        if tau[s - 1] != 0:
            gw += tau[s - 1] * gws
            gA += tau[s - 1] * gAs
    return gw, gA
