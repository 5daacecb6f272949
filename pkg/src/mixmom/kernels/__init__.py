"""Backend selection for the hot normal-equation kernels.

The compiled extension is preferred when importable; the numpy twin is always
available. Override with MIXMOM_BACKEND=numpy|cython (cython raises if the
extension is missing). esp_levels always comes from the numpy module, it is
reference machinery.
"""

import os

from . import numpy_backend

esp_levels = numpy_backend.esp_levels

_BACKENDS = {"numpy": numpy_backend}
try:
    from . import cy_backend

    _BACKENDS["cython"] = cy_backend
except ImportError:
    cy_backend = None

_requested = os.environ.get("MIXMOM_BACKEND", "auto").lower()
if _requested == "auto":
    _active = _BACKENDS.get("cython", numpy_backend)
elif _requested in _BACKENDS:
    _active = _BACKENDS[_requested]
else:
    raise ImportError(
        f"MIXMOM_BACKEND={_requested!r} not available; "
        f"choices: {sorted(_BACKENDS)} or auto"
    )


def backend_name():
    return _active.NAME


def available_backends():
    return sorted(_BACKENDS)


def set_backend(name):
    """Switch the rhs kernel provider (tests and benchmarks)."""
    global _active
    if name not in _BACKENDS:
        raise ValueError(f"backend {name!r} not available; have {sorted(_BACKENDS)}")
    _active = _BACKENDS[name]


def normal_rhs(gav, pi, coeffs, deflate_a=None, deflate_v=None):
    return _active.normal_rhs(gav, pi, coeffs, deflate_a, deflate_v)


def normal_lhs(gaa, coeffs, deflate_a=None):
    return numpy_backend.normal_lhs(gaa, coeffs, deflate_a)
