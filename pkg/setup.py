import os

import numpy as np
from setuptools import Extension, setup

# The compiled kernels are optional: without Cython (or a compiler) the
# package falls back to rcmoments._fallback at import time.
try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

ext_modules = []
if cythonize is not None and not os.environ.get("RCMOMENTS_NO_EXT"):
    ext_modules = cythonize(
        [
            Extension(
                "rcmoments._kernels",
                ["src/rcmoments/_kernels.pyx"],
                include_dirs=[np.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
