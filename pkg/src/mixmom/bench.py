"""Wall-clock and flop-model benchmark of the solver phases.

Times each phase on synthetic standard-normal inputs, once per available
kernel backend where the phase goes through the backend at all. The flop
column is a rough multiply-add model for orientation, not a measurement.
"""

from __future__ import annotations

import time

import numpy as np

from . import kernels
from .als import solve_row, update_means, update_weights
from .alsplus import update_mean_block
from .gradient import grad
from .gram import build_gram_cache, prep_norm_eqn, quad_cost
from .hyper import default_tau, row_tau
from .partitions import partitions

REPEATS = 3


def _time(fn):
    best = float("inf")
    for _ in range(REPEATS):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def _flops(n, r, p, d):
    prep = p * r * (1.5 * d * d + 2.0)
    lam_positions = sum(len(lam) for s in range(1, d + 1) for lam in partitions(s))
    return {
        "gram_build": d * (2.0 * r * n * p + 2.0 * n * p),
        "weight_update": prep + r**3 / 3.0,
        "row_solve": prep + 2.0 * d * r * p + r**3 / 3.0,
        "means_sweep": n * (prep + 2.0 * d * r * p + r**3 / 3.0),
        "block_sweep": (n / 2.0) * (prep + 4.0 * d * r * p + r**3 / 3.0),
        "gradient": lam_positions * 2.0 * n * r * p,
        "quad_cost": prep,
    }


def run_bench(n=30, r=5, p=20000, d=4, seed=0):
    """Returns a list of {phase, backend, seconds, mflop_model} dicts."""
    rng = np.random.default_rng(seed)
    V = rng.standard_normal((n, p))
    A = rng.standard_normal((n, r))
    w = np.full(r, 1.0 / r)
    tau = default_tau(n, d)
    pi = np.full(p, 1.0 / p)
    flops = _flops(n, r, p, d)

    backed = {"weight_update", "row_solve", "means_sweep", "block_sweep", "quad_cost"}
    rows = []
    for backend in kernels.available_backends():
        kernels.set_backend(backend)
        cache = build_gram_cache(A, V, d)
        phases = {
            "gram_build": lambda: build_gram_cache(A, V, d),
            "weight_update": lambda: update_weights(cache, tau),
            "row_solve": lambda: solve_row(
                cache, 0, w, V[0] / p, V[0].mean(), tau, update_cache=False
            ),
            "means_sweep": lambda: update_means(cache, w, tau),
            "block_sweep": lambda: [
                update_mean_block(cache, [k, k + 1], w, tau)
                for k in range(0, n - 1, 2)
            ],
            "gradient": lambda: grad(w, cache, pi, tau),
            "quad_cost": lambda: quad_cost(cache, w, pi, tau),
        }
        for phase, fn in phases.items():
            if backend != kernels.available_backends()[0] and phase not in backed:
                continue
            rows.append(
                {
                    "phase": phase,
                    "backend": backend if phase in backed else "numpy",
                    "seconds": _time(fn),
                    "mflop_model": flops[phase] / 1e6,
                }
            )
    kernels.set_backend(
        "cython" if "cython" in kernels.available_backends() else "numpy"
    )
    return rows


def format_table(rows):
    header = f"{'phase':<14} {'backend':<8} {'seconds':>10} {'mflop/s':>10} {'mflop':>10}"
    lines = [header, "-" * len(header)]
    for row in rows:
        rate = row["mflop_model"] / row["seconds"] if row["seconds"] > 0 else 0.0
        lines.append(
            f"{row['phase']:<14} {row['backend']:<8} "
            f"{row['seconds']:>10.4f} {rate:>10.1f} {row['mflop_model']:>10.1f}"
        )
    return "\n".join(lines)
