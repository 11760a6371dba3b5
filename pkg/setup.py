"""Build script: compiles the Gibbs sweep kernels when Cython is available.

The kernel module is written in Cython "pure Python" mode, so the package
works unchanged (just slower) if the extension cannot be built.
"""

import sys

from setuptools import setup

ext_modules = []
try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        ["src/ordanova/_kernels.py"],
        compiler_directives={"language_level": "3"},
    )
except Exception as exc:  # pragma: no cover - build-environment dependent
    print(f"ordanova: skipping compiled kernels ({exc})", file=sys.stderr)

setup(ext_modules=ext_modules)
