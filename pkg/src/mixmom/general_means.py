"""Componentwise means of transformed data, given fitted weights and means.

Replacing data row k by g_k(row k) only changes the mixture's means in row k,
so each transformed row satisfies the same deflated normal equations as a
mean-row solve: the off-row structure still comes from the fitted means and
the original standardized data, while the right-hand side weights come from
the transformed row. Each row is one linear solve; nothing is iterated and
the fitted estimate is never modified.
"""

from __future__ import annotations

import math
import warnings

import numpy as np

from .als import WEIGHT_FLOOR_GUARD, preprocess, to_hat_frame
from .errors import ConfigError, IdentifiabilityWarning, NumericalError
from .gram import build_gram_cache, prep_norm_eqn
from .hyper import default_tau, row_tau, validate_tau
from .linalg import spd_solve
from .qp import solve_bounded_qp

DEFAULT_VARIANCE_FLOOR = 1e-4


class EntrywiseFunction:
    """A transform applied entrywise, optionally different per coordinate.

    fn is a vectorized callable, or a list of n callables (one per data row).
    """

    def __init__(self, fn, name="custom"):
        self.fn = fn
        self.name = name

    def apply(self, V):
        V = np.asarray(V, dtype=float)
        if callable(self.fn):
            return self.fn(V)
        if len(self.fn) != V.shape[0]:
            raise ConfigError(
                f"per-row transform list has {len(self.fn)} entries "
                f"for {V.shape[0]} rows"
            )
        return np.stack([f(row) for f, row in zip(self.fn, V)])

    @classmethod
    def from_name(cls, name):
        """Built-ins: identity, square, power:<s>, log, indicator:<threshold>."""
        if name == "identity":
            return cls(lambda V: V, name)
        if name == "square":
            return cls(lambda V: V * V, name)
        if name.startswith("power:"):
            s = int(name.split(":", 1)[1])
            if s < 1:
                raise ConfigError("power transform needs a positive exponent")
            return cls(lambda V: V**s, name)
        if name == "log":
            return cls(np.log, name)
        if name.startswith("indicator:"):
            thr = float(name.split(":", 1)[1])
            return cls(lambda V: (V >= thr).astype(float), name)
        raise ConfigError(f"unknown entrywise function {name!r}")


def general_uniqueness_bound(n, d):
    return math.comb(n - 1, d - 1)


def _prepare(V, weights, means, d, tau):
    V = np.asarray(V, dtype=float)
    weights = np.asarray(weights, dtype=float)
    means = np.asarray(means, dtype=float)
    n = V.shape[0]
    if means.shape[0] != n or means.shape[1] != weights.size:
        raise ConfigError("V, weights and means have inconsistent shapes")
    if d < 2:
        raise ConfigError("general-mean solves need order d >= 2")
    if np.any(weights < WEIGHT_FLOOR_GUARD):
        raise NumericalError(
            f"weight below {WEIGHT_FLOOR_GUARD:g}; transformed-mean solves "
            "divide by the fitted weights"
        )
    tau = default_tau(n, d) if tau is None else validate_tau(tau, d)
    r = weights.size
    bound = general_uniqueness_bound(n, d)
    if r > bound:
        warnings.warn(
            f"r={r} exceeds the transformed-mean uniqueness bound "
            f"C(n-1, d-1) = {bound} for n={n}, d={d}",
            category=IdentifiabilityWarning,
            stacklevel=3,
        )
    data = preprocess(V)
    cache = build_gram_cache(to_hat_frame(means, data), data.values, d)
    return data, cache, weights, tau


def solve_general_mean(g: EntrywiseFunction, V, weights, means, d, tau=None):
    """Componentwise means of g applied to the data, in the raw frame.

    weights and means are the fitted estimate in the raw data frame. Returns
    an n x r matrix Y; row k solves the moment equations with data row k
    replaced by g_k(row k), all other rows untouched.
    """
    data, cache, w, tau = _prepare(V, weights, means, d, tau)
    gdata = preprocess(g.apply(V))
    rt = row_tau(tau)
    Y_hat = np.empty_like(cache.A)
    for k in range(data.n):
        eqn = prep_norm_eqn(
            cache, gdata.values[k] / data.p, cache.order - 1, rt, deflate_rows=[k]
        )
        beta = spd_solve(eqn.lhs + tau[0], eqn.rhs)
        Y_hat[k] = beta / w
    return gdata.scale[:, None] * Y_hat + gdata.center[:, None]


def solve_second_moment_floored(
    V, weights, means, d, tau=None, floor=DEFAULT_VARIANCE_FLOOR
):
    """Componentwise second moments, floored at means^2 + floor entrywise.

    Same row solves as solve_general_mean with g = square, except each row's
    unconstrained solution is replaced by the bound-constrained minimizer of
    the same quadratic, so every implied variance is at least `floor`.
    """
    data, cache, w, tau = _prepare(V, weights, means, d, tau)
    means = np.asarray(means, dtype=float)
    gdata = preprocess(np.asarray(V, dtype=float) ** 2)
    rt = row_tau(tau)
    Y_hat = np.empty_like(cache.A)
    for k in range(data.n):
        eqn = prep_norm_eqn(
            cache, gdata.values[k] / data.p, cache.order - 1, rt, deflate_rows=[k]
        )
        lhs = eqn.lhs + tau[0]
        beta = spd_solve(lhs, eqn.rhs)
        raw_bound = means[k] ** 2 + floor
        lower = w * (raw_bound - gdata.center[k]) / gdata.scale[k]
        if np.any(beta < lower):
            beta = solve_bounded_qp(lhs, beta, lower)
        Y_hat[k] = beta / w
    return gdata.scale[:, None] * Y_hat + gdata.center[:, None]
