"""Build hook for the optional Cython kernels.

If Cython or a C compiler is unavailable the package still installs and the
pure-Python kernels are used at import time.
"""
import os

from setuptools import setup

ext_modules = []
if os.environ.get("AFFORDKIT_NO_EXT") != "1":
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [
                Extension(
                    "affordkit.geometry._ckernels",
                    ["src/affordkit/geometry/_ckernels.pyx"],
                    include_dirs=[np.get_include()],
                    extra_compile_args=["-O3"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
