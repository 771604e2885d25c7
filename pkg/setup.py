"""Build script for the optional compiled evaluation kernel.

The package works without the extension (a vectorized numpy executor is
selected at import time), so a failed build only costs speed.
Build in place with:  python setup.py build_ext --inplace
"""
from setuptools import Extension, setup

import numpy as np

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

ext = Extension(
    "gaussconc.backends._evalcore",
    ["src/gaussconc/backends/_evalcore.pyx"],
    include_dirs=[np.get_include()],
    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
)

setup(ext_modules=cythonize([ext], language_level=3) if cythonize else [])
