"""Build script: compiles the optional Cython kernel for the Monte Carlo hot loop.

The package is fully functional without the extension (a pure-Python kernel
with an identical random stream is selected at import time).  Set
MARKAUDIT_NO_EXT=1 to skip compilation.
"""
import os

from setuptools import Extension, setup

ext_modules = []
if os.environ.get("MARKAUDIT_NO_EXT") != "1":
    try:
        import numpy
        from Cython.Build import cythonize

        ext_modules = cythonize(
            [
                Extension(
                    "markaudit._kernels",
                    ["src/markaudit/_kernels.pyx"],
                    include_dirs=[numpy.get_include()],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                )
            ],
            language_level="3",
        )
    except ImportError:
        ext_modules = []

# name/packages repeated here so legacy setup.py code paths (old pip) work
setup(
    name="markaudit",
    version="0.1.0",
    package_dir={"": "src"},
    packages=["markaudit"],
    ext_modules=ext_modules,
)
