"""Small SPD solve helper with a one-shot ridge fallback.

FACTOR_COUNT tracks Cholesky factorizations so tests can assert how many a
sweep performs.
"""

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .errors import NumericalError

FACTOR_COUNT = 0

PIVOT_RTOL = 1e-12
RIDGE_SCALE = 1e-10


def _factor(M):
    global FACTOR_COUNT
    FACTOR_COUNT += 1
    c, low = cho_factor(M, lower=True, check_finite=False)
    piv = np.diag(c) ** 2
    if piv.min() < PIVOT_RTOL * piv.max():
        raise LinAlgError("relative pivot below threshold")
    return c, low


def spd_solve(M, rhs):
    """Solve M x = rhs for SPD M; on a near-singular factorization add
    1e-10 * trace(M)/dim to the diagonal and retry once."""
    M = np.asarray(M, dtype=float)
    try:
        f = _factor(M)
    except LinAlgError:
        ridge = RIDGE_SCALE * np.trace(M) / M.shape[0]
        try:
            f = _factor(M + ridge * np.eye(M.shape[0]))
        except LinAlgError as exc:
            raise NumericalError(
                "SPD solve failed even with ridge regularization; "
                "the normal-equation matrix is numerically singular"
            ) from exc
    return cho_solve(f, rhs, check_finite=False)
