"""Reference numpy kernels for normal-equation assembly.

These materialize the deflated Gram stacks and the full E-recursion levels.
The compiled twin in cy_backend streams data columns instead; both must
produce the same (lhs, rhs) to rounding.
"""

import numpy as np

NAME = "numpy"


def esp_levels(gstack):
    """E_0..E_d from stacked G_1..G_d via the signed power-sum recursion.

    gstack has shape (d, ...); level s sits at index s-1. E_0 is all-ones.
    Entry (j, l) of E_i is e_i of the entrywise product of column j of one
    factor matrix with column l of the other, up to the shared index set.
    """
    d = gstack.shape[0]
    out = np.empty((d + 1,) + gstack.shape[1:])
    out[0] = 1.0
    for i in range(1, d + 1):
        acc = np.zeros_like(out[0])
        sign = 1.0
        for s in range(1, i + 1):
            acc += sign * out[i - s] * gstack[s - 1]
            sign = -sign
        out[i] = acc / i
    return out


def _deflated(gstack, minus_left, minus_right):
    if minus_left is None:
        return gstack
    return gstack - np.einsum("smi,smj->sij", minus_left, minus_right)


def normal_lhs(gaa, coeffs, deflate_a=None):
    """sum_i coeffs[i-1] * E_i built from gaa, optionally minus rank-m terms.

    gaa: (d, r, r) Gram stack; deflate_a: (d, m, r) entrywise powers of the
    removed rows. Returns (r, r).
    """
    levels = esp_levels(_deflated(gaa, deflate_a, deflate_a))
    return np.tensordot(coeffs, levels[1:], axes=(0, 0))


def normal_rhs(gav, pi, coeffs, deflate_a=None, deflate_v=None):
    """(sum_i coeffs[i-1] * E_i) @ pi with E built from gav.

    gav: (d, r, p); pi: (p, k); deflations as in normal_lhs with the data-side
    powers in deflate_v: (d, m, p). Returns (r, k).
    """
    levels = esp_levels(_deflated(gav, deflate_a, deflate_v))
    weighted = np.tensordot(coeffs, levels[1:], axes=(0, 0))
    return weighted @ pi
