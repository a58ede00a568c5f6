"""Build script: compiles the optional stepping kernels.

The package works without the extension (a numpy fallback is selected at
import time), so a failed compile only costs speed. `pip install -e .
--no-build-isolation` with Cython available builds the fast path.
"""

import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

ext_modules = []
if cythonize is not None:
    ext_modules = cythonize(
        [
            Extension(
                "fracorder._kernels",
                ["src/fracorder/_kernels.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
