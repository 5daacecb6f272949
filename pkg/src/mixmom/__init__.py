"""Implicit method-of-moments estimation for conditionally independent mixtures.

Weights and componentwise means of a mixture in R^n are fit by matching
off-diagonal moment tensors up to a chosen order, without ever forming a
tensor: all solves run on small Gram matrices of entrywise powers. A dense
oracle mirrors every implicit computation at toy sizes for verification.

Set MIXMOM_NUM_THREADS before launching to pin the BLAS thread pools; it must
take effect before numpy loads, which is why it is handled here.
"""

import os as _os

if "MIXMOM_NUM_THREADS" in _os.environ:
    for _k in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        _os.environ.setdefault(_k, _os.environ["MIXMOM_NUM_THREADS"])

from .als import (
    DataMatrix,
    FitResult,
    MixtureEstimate,
    preprocess,
    solve_mean_and_weight,
)
from .alsplus import fit_als_plus
from .errors import (
    ConfigError,
    IdentifiabilityWarning,
    MixmomError,
    NumericalError,
    ResourceLimitError,
)
from .general_means import (
    EntrywiseFunction,
    solve_general_mean,
    solve_second_moment_floored,
)
from .hyper import FitOptions, default_tau
from .kernels import available_backends, backend_name
from .metrics import ErrorReport, match_and_score, rank_scan, sample_reference
from .models import (
    PROTOCOLS,
    MixtureSpec,
    gen_bernoulli_protocol,
    gen_gamma_protocol,
    gen_gaussian_protocol,
    gen_heterogeneous_protocol,
    gen_poisson_image_protocol,
    gen_ranksel_gaussian,
    sample_mixture,
    synth_smooth_images,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "DataMatrix",
    "EntrywiseFunction",
    "ErrorReport",
    "FitOptions",
    "FitResult",
    "IdentifiabilityWarning",
    "MixmomError",
    "MixtureEstimate",
    "MixtureSpec",
    "NumericalError",
    "PROTOCOLS",
    "ResourceLimitError",
    "available_backends",
    "backend_name",
    "default_tau",
    "fit_als_plus",
    "gen_bernoulli_protocol",
    "gen_gamma_protocol",
    "gen_gaussian_protocol",
    "gen_heterogeneous_protocol",
    "gen_poisson_image_protocol",
    "gen_ranksel_gaussian",
    "match_and_score",
    "preprocess",
    "rank_scan",
    "sample_mixture",
    "sample_reference",
    "solve_general_mean",
    "solve_mean_and_weight",
    "solve_second_moment_floored",
    "synth_smooth_images",
    "__version__",
]
