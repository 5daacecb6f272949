"""Build script for the optional compiled kernel backend.

The package works without the extension (a numpy twin is selected at import
time), so compilation problems are not fatal. Set MIXMOM_SKIP_EXT=1 to skip
building the extension entirely.
"""

import os

from setuptools import Extension, setup


def extensions():
    if os.environ.get("MIXMOM_SKIP_EXT"):
        return []
    try:
        import numpy as np
        from Cython.Build import cythonize
    except ImportError:
        return []
    ext = Extension(
        "mixmom.kernels.cy_backend",
        ["src/mixmom/kernels/cy_backend.pyx"],
        include_dirs=[np.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
    return cythonize([ext], language_level=3)


setup(ext_modules=extensions())
