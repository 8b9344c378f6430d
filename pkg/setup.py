"""Build script: compiles the optional Cython kernel for the two-layer network.

The package is fully functional without the extension (a numpy fallback is
selected at import time), so compilation failures are non-fatal.
"""
import sys

from setuptools import setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [
            Extension(
                "gfucb._twolayer_c",
                ["src/gfucb/_twolayer_c.pyx"],
                include_dirs=[numpy.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={
            "language_level": "3",
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
            "initializedcheck": False,
        },
    )
except Exception as exc:  # pragma: no cover - build-environment dependent
    sys.stderr.write(f"gfucb: building without compiled kernels ({exc})\n")

setup(ext_modules=ext_modules)
