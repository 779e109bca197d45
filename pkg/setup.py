"""Build script for the compiled grid kernels.

The package works without the extension (a NumPy fallback is selected at
import time), so the build degrades gracefully when Cython or a C compiler
is unavailable.
"""

from setuptools import Extension, setup

try:
    import numpy
    from Cython.Build import cythonize

    extensions = cythonize(
        [
            Extension(
                "quotefilter._kernels",
                ["src/quotefilter/_kernels.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    )
except ImportError:
    extensions = []

setup(ext_modules=extensions)
