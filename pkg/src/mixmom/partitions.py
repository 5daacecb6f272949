"""Integer partitions and the signed coefficients tying power sums to ESPs.

d! e_d equals the determinant of the d x d lower-Hessenberg matrix with
power sums p_1..p_d down the first column, constants 1..d-1 on the
superdiagonal, and shifted power-sum columns below. Expanding that
determinant along its last row gives

    D_d = sum_{j=0}^{d-1} (-1)^(d-1+j) * (d-1)!/j! * p_{d-j} * D_j,  D_0 = 1,

with every D_j a polynomial in the p_s with integer coefficients. The
coefficient of the monomial prod_{s in lam} p_s is written N_lam here.
"""

from __future__ import annotations

import math
from functools import lru_cache


def partitions(d: int):
    """All partitions of d as non-increasing tuples, descending lex order.

    partitions(0) is [()], the empty partition.
    """
    if d < 0:
        raise ValueError("d must be nonnegative")

    def gen(total, largest):
        if total == 0:
            yield ()
            return
        for first in range(min(total, largest), 0, -1):
            for rest in gen(total - first, first):
                yield (first,) + rest

    return list(gen(d, d))


@lru_cache(maxsize=None)
def _hessenberg_poly(d: int):
    """d! e_d as {partition-of-d: integer coefficient}, by cofactor expansion."""
    if d == 0:
        return {(): 1}
    out: dict[tuple, int] = {}
    fact = math.factorial(d - 1)
    for j in range(d):
        sign = -1 if (d - 1 + j) % 2 else 1
        scale = sign * (fact // math.factorial(j))
        part = d - j
        for lam, coeff in _hessenberg_poly(j).items():
            key = tuple(sorted(lam + (part,), reverse=True))
            out[key] = out.get(key, 0) + scale * coeff
    return {lam: c for lam, c in out.items() if c != 0}


def partition_coefficients(d: int) -> dict[tuple, int]:
    """Table {lam: N_lam} for every partition lam of every order i <= d."""
    from .hyper import MAX_ORDER

    if not 1 <= d <= MAX_ORDER:
        raise ValueError(f"d must lie in 1..{MAX_ORDER}")
    table: dict[tuple, int] = {}
    for i in range(1, d + 1):
        table.update(_hessenberg_poly(i))
    return table
