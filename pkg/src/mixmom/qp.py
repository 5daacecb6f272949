"""Metric projections onto the simplex and box-bounded sets.

solve_simplex_qp computes argmin (w - w0)^T L (w - w0) over the simplex with
an optional uniform lower bound, by a primal active-set method: the equality
constraint is eliminated through a null-space parametrization of the free
coordinates, each reduced SPD system goes through the ridge-guarded Cholesky
helper, and bound multipliers decide release. solve_bounded_qp is the same
engine without the sum constraint, used by the floored moment solves.
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigError, NumericalError
from .linalg import spd_solve

DEFAULT_TOL = 1e-10


def project_simplex(v, lb=0.0):
    """Euclidean projection onto {w : sum w = 1, w_i >= lb} by sorting."""
    v = np.asarray(v, dtype=float)
    r = v.size
    if lb * r > 1.0 + 1e-12:
        raise ConfigError(f"lower bound {lb} infeasible for {r} coordinates")
    slack = 1.0 - lb * r
    if slack <= 0.0:
        return np.full(r, lb)
    u = (v - lb) / slack
    mu = np.sort(u)[::-1]
    cums = np.cumsum(mu) - 1.0
    j = np.arange(1, r + 1)
    rho = np.max(j[mu - cums / j > 0])
    theta = cums[rho - 1] / rho
    return lb + slack * np.maximum(u - theta, 0.0)


def _check_indefinite(L, tol):
    lam = np.linalg.eigvalsh(L)
    scale = max(abs(lam[0]), abs(lam[-1]), 1.0)
    if lam[0] < -tol * scale:
        raise NumericalError(
            "quadratic form is indefinite beyond tolerance on the feasible set"
        )


def solve_simplex_qp(L, w0, q=0.0, tol=DEFAULT_TOL):
    """argmin (w - w0)^T L (w - w0)  s.t.  sum w = 1,  w_i >= q / len(w0)."""
    L = np.asarray(L, dtype=float)
    w0 = np.asarray(w0, dtype=float)
    r = w0.size
    if L.shape != (r, r):
        raise ConfigError(f"L must be {r} x {r}, got {L.shape}")
    if not 0.0 <= q <= 1.0:
        raise ConfigError("q must lie in [0, 1]")
    lb = q / r
    if r == 1:
        return np.ones(1)
    if 1.0 - lb * r <= tol:
        return np.full(r, 1.0 / r)

    L = 0.5 * (L + L.T)
    w = project_simplex(w0, lb)
    active = w <= lb + tol
    w[active] = lb

    for _ in range(5 * r + 50):
        free = ~active
        f = int(free.sum())
        idx = np.flatnonzero(free)
        budget = 1.0 - lb * (r - f)
        if f == 1:
            w_free = np.array([budget])
        else:
            # w_free = c + M u with u the first f-1 free coordinates
            Lff = L[np.ix_(idx, idx)]
            g0 = (L @ _bound_vector(r, active, lb) - L @ w0)[idx]
            M = np.vstack([np.eye(f - 1), -np.ones(f - 1)])
            c = np.zeros(f)
            c[-1] = budget
            H = M.T @ Lff @ M
            rhs = -M.T @ (Lff @ c + g0)
            try:
                u = spd_solve(H, rhs)
            except NumericalError:
                _check_indefinite(H, tol)
                raise
            w_free = c + M @ u

        if w_free.min() >= lb - tol:
            w[idx] = np.maximum(w_free, lb)
            # multipliers: nu_i = (2 L (w - w0) + mu 1)_i for active i
            grad = 2.0 * (L @ (w - w0))
            mu = -grad[idx].mean()
            nu = grad + mu
            worst = None
            worst_val = -tol * max(1.0, np.abs(grad).max())
            for i in np.flatnonzero(active):
                if nu[i] < worst_val:
                    worst_val = nu[i]
                    worst = i
            if worst is None:
                return w
            active[worst] = False
        else:
            step = w_free - w[idx]
            viol = step < -tol
            alphas = (lb - w[idx][viol]) / step[viol]
            alpha = max(0.0, float(alphas.min()))
            w[idx] = w[idx] + alpha * step
            block = idx[viol][np.argmin(alphas)]
            w[block] = lb
            active[block] = True
    raise NumericalError("active-set iteration limit exceeded in simplex QP")


def _bound_vector(r, active, lb):
    v = np.zeros(r)
    v[active] = lb
    return v


def solve_bounded_qp(L, w0, lower, tol=DEFAULT_TOL):
    """argmin (w - w0)^T L (w - w0)  s.t.  w >= lower (elementwise)."""
    L = np.asarray(L, dtype=float)
    w0 = np.asarray(w0, dtype=float)
    lower = np.asarray(lower, dtype=float)
    r = w0.size
    if L.shape != (r, r) or lower.shape != (r,):
        raise ConfigError("shape mismatch in bounded QP")
    L = 0.5 * (L + L.T)
    w = np.maximum(w0, lower)
    active = w0 <= lower + tol

    for _ in range(5 * r + 50):
        idx = np.flatnonzero(~active)
        if idx.size == 0:
            w = lower.copy()
        else:
            act = np.flatnonzero(active)
            rhs = L[np.ix_(idx, idx)] @ w0[idx] - L[np.ix_(idx, act)] @ (
                lower[act] - w0[act]
            )
            try:
                w_free = spd_solve(L[np.ix_(idx, idx)], rhs)
            except NumericalError:
                _check_indefinite(L[np.ix_(idx, idx)], tol)
                raise
            if (w_free < lower[idx] - tol).any():
                step = w_free - w[idx]
                viol = step < -tol
                gaps = lower[idx][viol] - w[idx][viol]
                alphas = gaps / step[viol]
                alpha = max(0.0, float(alphas.min()))
                w[idx] = w[idx] + alpha * step
                block = idx[viol][np.argmin(alphas)]
                w[block] = lower[block]
                active[block] = True
                continue
            w[idx] = np.maximum(w_free, lower[idx])
            w[active] = lower[active]
        grad = 2.0 * (L @ (w - w0))
        scale = max(1.0, np.abs(grad).max())
        releasable = np.flatnonzero(active & (grad < -tol * scale))
        if releasable.size == 0:
            return w
        active[releasable[np.argmin(grad[releasable])]] = False
    raise NumericalError("active-set iteration limit exceeded in bounded QP")
