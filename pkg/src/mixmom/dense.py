"""Dense small-scale oracle.

Materializes moment tensors and off-diagonal projections so every implicit
computation in the package has an independent, readable cross-check. All
entry points share a hard budget on tensor size; these routines exist for
tests and debugging, never for production-scale data.
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigError, ResourceLimitError
from .partitions import partitions

MAX_DENSE_ENTRIES = 10**7


def _check_budget(n, ways):
    if n**ways > MAX_DENSE_ENTRIES:
        raise ResourceLimitError(
            f"dense tensor with {n}^{ways} entries exceeds the "
            f"{MAX_DENSE_ENTRIES:.0e} budget"
        )


def distinct_mask(n, ways):
    """Boolean (n,)*ways array, True where all indices are pairwise distinct."""
    _check_budget(n, ways)
    mask = np.ones((n,) * ways, dtype=bool)
    for a in range(ways):
        ia = np.arange(n).reshape((1,) * a + (n,) + (1,) * (ways - a - 1))
        for b in range(a + 1, ways):
            ib = np.arange(n).reshape((1,) * b + (n,) + (1,) * (ways - b - 1))
            mask &= ia != ib
    return mask


def offdiag_project(T, lam=None):
    """P_lam: gather entries with index i_t repeated lam_t times, zero the rest.

    With lam omitted (or all ones) this is the plain off-diagonal projection:
    same shape as T, entries with any repeated index set to zero. General lam
    returns an len(lam)-way tensor of shape (n,)*len(lam).
    """
    T = np.asarray(T, dtype=float)
    n = T.shape[0]
    if any(s != n for s in T.shape):
        raise ConfigError(f"tensor must be cubical, got shape {T.shape}")
    d = T.ndim
    if lam is None:
        lam = (1,) * d
    lam = tuple(int(x) for x in lam)
    if sum(lam) != d or any(x < 1 for x in lam):
        raise ConfigError(f"lam {lam} is not a partition of the tensor order {d}")
    ell = len(lam)
    _check_budget(n, ell)
    gather = []
    for t, rep in enumerate(lam):
        it = np.arange(n).reshape((1,) * t + (n,) + (1,) * (ell - t - 1))
        gather.extend([it] * rep)
    out = T[tuple(gather)] * distinct_mask(n, ell)
    return out


def sample_moment(V, d):
    """Dense order-d sample moment tensor (1/p) sum_l v_l^(x)d."""
    V = np.asarray(V, dtype=float)
    n, p = V.shape
    _check_budget(n, d)
    subs = [V] * d
    script = ",".join(f"{chr(97 + i)}z" for i in range(d))
    out = "".join(chr(97 + i) for i in range(d))
    return np.einsum(f"{script}->{out}", *subs) / p


def weighted_outer(cols, weights, reps):
    """sum_j weights_j c_j^(x)reps for the columns of an n x r matrix."""
    cols = np.asarray(cols, dtype=float)
    n = cols.shape[0]
    _check_budget(n, reps)
    subs = [cols] * reps
    script = ",".join(f"{chr(97 + i)}z" for i in range(reps))
    out = "".join(chr(97 + i) for i in range(reps))
    return np.einsum(f"{script},z->{out}", *subs, np.asarray(weights, dtype=float))


def mixed_outer(moment_cols, weights, lam):
    """sum_j weights_j  m_j^(lam_1) (x) ... (x) m_j^(lam_ell).

    moment_cols maps an order s to the n x r matrix of order-s componentwise
    means; lam picks which order sits in each tensor slot.
    """
    lam = tuple(int(x) for x in lam)
    mats = [np.asarray(moment_cols[s], dtype=float) for s in lam]
    n = mats[0].shape[0]
    _check_budget(n, len(lam))
    script = ",".join(f"{chr(97 + i)}z" for i in range(len(lam)))
    out = "".join(chr(97 + i) for i in range(len(lam)))
    return np.einsum(f"{script},z->{out}", *mats, np.asarray(weights, dtype=float))


def dense_cost(V, w, A, tau):
    """sum_i tau_i || offdiag( sum_j w_j a_j^(x)i  -  Mhat^i ) ||_F^2."""
    tau = np.asarray(tau, dtype=float)
    total = 0.0
    for i in range(1, len(tau) + 1):
        if tau[i - 1] == 0:
            continue
        resid = offdiag_project(weighted_outer(A, w, i) - sample_moment(V, i))
        total += tau[i - 1] * float((resid**2).sum())
    return total


def coupled_system_residuals(V, w, moment_cols, d):
    """Frobenius residual of every off-diagonal moment equation up to order d.

    Returns {lam: || offdiag(model side) - P_lam(Mhat^|lam|) ||_F} over all
    partitions lam of every order i <= d. moment_cols must cover every part
    size appearing in those partitions.
    """
    out = {}
    for i in range(1, d + 1):
        M = sample_moment(V, i)
        for lam in partitions(i):
            model = offdiag_project(mixed_outer(moment_cols, w, lam))
            data = offdiag_project(M, lam)
            out[lam] = float(np.sqrt(((model - data) ** 2).sum()))
    return out
