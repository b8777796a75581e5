import os

import numpy as np
from setuptools import Extension, setup

ext_modules = []
if os.environ.get("FMPGRAPH_NO_EXT") != "1":
    try:
        from Cython.Build import cythonize
    except ImportError:
        cythonize = None
    if cythonize is not None:
        ext = Extension(
            "fmpgraph._ckernels",
            ["src/fmpgraph/_ckernels.pyx"],
            include_dirs=[np.get_include()],
            # keep a*b+c as two roundings so both backends agree bit-for-bit
            extra_compile_args=["-O3", "-ffp-contract=off"],
            define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        )
        ext_modules = cythonize(
            [ext],
            language_level=3,
            compiler_directives={"boundscheck": False, "wraparound": False},
        )

setup(ext_modules=ext_modules)
