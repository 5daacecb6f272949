"""Cost-order weights and fit options.

The order-i residual in the moment-matching cost carries a weight tau_i.
The default schedule tau_i = (n-i)! / n! makes every weighted Gram term
O(1): the combined coefficient i! * tau_i equals 1 / C(n, i) <= 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError

MAX_ORDER = 6


def default_tau(n: int, d: int) -> np.ndarray:
    """Weights tau_i = 1/(n (n-1) ... (n-i+1)) for i = 1..d.

    Running products, so large n never routes through a factorial.
    """
    if not 1 <= d <= MAX_ORDER:
        raise ConfigError(f"order d={d} outside supported range 1..{MAX_ORDER}")
    if d > n:
        raise ConfigError(f"order d={d} exceeds dimension n={n}")
    tau = np.empty(d)
    acc = 1.0
    for i in range(1, d + 1):
        acc /= n - i + 1
        tau[i - 1] = acc
    return tau


def validate_tau(tau, d: int) -> np.ndarray:
    """Check a user-supplied weight vector: length d, nonnegative, at least
    two positive entries (two distinct active orders are required for the
    weights and means to be pinned down jointly)."""
    tau = np.asarray(tau, dtype=float)
    if tau.shape != (d,):
        raise ConfigError(f"tau must have shape ({d},), got {tau.shape}")
    if np.any(tau < 0) or not np.all(np.isfinite(tau)):
        raise ConfigError("tau entries must be finite and nonnegative")
    if np.count_nonzero(tau > 0) < 2:
        raise ConfigError("tau needs at least two positive entries at distinct orders")
    return tau


def order_coeffs(tau: np.ndarray) -> np.ndarray:
    """Combined coefficients i! * tau_i, one per order i = 1..len(tau)."""
    d = len(tau)
    return np.array([math.factorial(i) * tau[i - 1] for i in range(1, d + 1)])


def row_tau(tau: np.ndarray) -> np.ndarray:
    """Hyperparameters for a row subproblem at order d-1: entry i is
    (i+1) * tau_{i+1}, the chain-rule weight the order-(i+1) residual puts on
    a single tensor slot."""
    d = len(tau)
    return np.array([(i + 1) * tau[i] for i in range(1, d)])


@dataclass
class FitOptions:
    """Knobs for the alternating solvers. Defaults follow the reference setup."""

    xtol: float = 1e-4
    max_iter: int = 200
    warmup_steps: int = 20
    block_size: int = 2
    weight_floor: float = 0.1
    aa_depth: int = 15
    aa_eps: float = 1e-4
    aa_enabled: bool = True
    drop_one: bool = True
    cost_tol: float | None = None
    seed: int = 0
    tau: np.ndarray | None = None

    def resolved_tau(self, n: int, d: int) -> np.ndarray:
        if self.tau is None:
            return default_tau(n, d)
        return validate_tau(self.tau, d)

    def validate(self):
        if self.xtol <= 0:
            raise ConfigError("xtol must be positive")
        if self.max_iter < 0:
            raise ConfigError("max_iter must be nonnegative")
        if self.warmup_steps < 0:
            raise ConfigError("warmup_steps must be nonnegative")
        if self.block_size < 1:
            raise ConfigError("block_size must be at least 1")
        if not 0 <= self.weight_floor <= 1:
            raise ConfigError("weight_floor must lie in [0, 1]")
        if self.aa_depth < 1:
            raise ConfigError("aa_depth must be at least 1")
        if self.aa_eps < 0:
            raise ConfigError("aa_eps must be nonnegative")
        if self.cost_tol is not None and self.cost_tol < 0:
            raise ConfigError("cost_tol must be nonnegative")
        return self
