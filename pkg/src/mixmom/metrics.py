"""Permutation-matched error metrics and the rank scan.

Estimates are only determined up to a relabeling of components, so scoring
first matches estimated to reference columns by minimum-cost assignment on
the mean columns, then reuses that matching for every other quantity. Errors
are squared relative Frobenius norms, reported in percent.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import linear_sum_assignment

from .alsplus import fit_als_plus
from .errors import ConfigError
from .hyper import FitOptions


def sample_reference(V, labels, g=None, r=None):
    """Label-conditional sample means of g(V) (g defaults to the identity).

    Returns an n x r matrix; component j averages the columns with label j.
    Empty components are an error: the reference is undefined there.
    """
    V = np.asarray(V, dtype=float)
    labels = np.asarray(labels)
    if labels.shape != (V.shape[1],):
        raise ConfigError("labels must have one entry per data column")
    if g is not None:
        V = g.apply(V) if hasattr(g, "apply") else g(V)
    r = int(labels.max()) + 1 if r is None else r
    out = np.empty((V.shape[0], r))
    for j in range(r):
        idx = np.flatnonzero(labels == j)
        if idx.size == 0:
            raise ConfigError(f"component {j} has no sampled columns")
        out[:, j] = V[:, idx].mean(axis=1)
    return out


def match_components(means, ref_means):
    """Index map perm with perm[j] = estimated column matched to reference j,
    minimizing the total squared distance between matched mean columns."""
    means = np.asarray(means, dtype=float)
    ref_means = np.asarray(ref_means, dtype=float)
    if means.shape != ref_means.shape:
        raise ConfigError("estimate and reference mean shapes differ")
    diff = means.T[:, None, :] - ref_means.T[None, :, :]
    cost = (diff**2).sum(axis=2)
    rows, cols = linear_sum_assignment(cost)
    perm = np.empty(means.shape[1], dtype=int)
    perm[cols] = rows
    return perm


def _pct(est, ref):
    ref = np.asarray(ref, dtype=float)
    denom = float((ref**2).sum())
    if denom == 0.0:
        raise ConfigError("reference is identically zero; relative error undefined")
    return 100.0 * float(((np.asarray(est) - ref) ** 2).sum()) / denom


@dataclass
class ErrorReport:
    weight_error: float
    mean_error: float
    moment_errors: dict
    permutation: np.ndarray

    def to_json(self):
        return {
            "weight_error_pct": self.weight_error,
            "mean_error_pct": self.mean_error,
            "moment_errors_pct": {str(k): v for k, v in self.moment_errors.items()},
            "permutation": [int(i) for i in self.permutation],
        }


def match_and_score(weights, means, ref_weights, ref_means, moments=None) -> ErrorReport:
    """Match on means, then score weights, means and any extra moment pairs.

    moments maps a label to (estimated, reference) n x r matrices scored
    under the same column matching.
    """
    perm = match_components(means, ref_means)
    weights = np.asarray(weights, dtype=float)
    means = np.asarray(means, dtype=float)
    report = ErrorReport(
        weight_error=_pct(weights[perm], ref_weights),
        mean_error=_pct(means[:, perm], ref_means),
        moment_errors={},
        permutation=perm,
    )
    for key, (est, ref) in (moments or {}).items():
        report.moment_errors[key] = _pct(np.asarray(est)[:, perm], ref)
    return report


def _scan_one(args):
    V, r, d, options = args
    res = fit_als_plus(V, r, d, options=options)
    return {
        "r": r,
        "cost": res.cost_trace[-1] if res.cost_trace else float("nan"),
        "iterations": res.state.iterations,
        "converged": bool(res.state.converged),
    }


def rank_scan(V, ranks, d, options: FitOptions | None = None, cost_tol=1e-6, jobs=1):
    """Fit every rank in `ranks` and report the final cost of each.

    Fits stop early once the relative per-iteration cost improvement falls
    below cost_tol. Costs exclude the data-only constant, so they can be
    negative; only differences across ranks are meaningful. jobs > 1 runs
    ranks in separate processes.
    """
    options = options or FitOptions()
    if cost_tol is not None:
        options = replace(options, cost_tol=cost_tol)
    ranks = [int(r) for r in ranks]
    if not ranks or any(r < 1 for r in ranks):
        raise ConfigError("ranks must be positive integers")
    V = np.asarray(V, dtype=float)
    tasks = [(V, r, d, options) for r in ranks]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_scan_one, tasks))
    return [_scan_one(t) for t in tasks]
