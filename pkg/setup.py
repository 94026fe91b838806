"""Build the optional Cython kernels.

The package works without them (``wshift._fallback`` is selected at import),
so a failed compile only costs speed.
"""
import os

from setuptools import setup

ext_modules = []
if not os.environ.get("WSHIFT_NO_EXT"):
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension
    except ImportError:
        pass
    else:
        ext_modules = cythonize(
            [
                Extension(
                    "wshift._kernels",
                    ["src/wshift/_kernels.pyx"],
                    include_dirs=[np.get_include()],
                    # no FMA contraction: both backends must round identically
                    extra_compile_args=["-O3", "-ffp-contract=off"],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                )
            ],
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=ext_modules)
