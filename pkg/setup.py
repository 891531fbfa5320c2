"""Build script for the optional compiled Monte Carlo kernel.

The extension is optional: if Cython or a C compiler is unavailable the
package installs without it and falls back to the numpy implementation.
"""

import os

from setuptools import setup

ext_modules = []
if not os.environ.get("EDGEWORTH_DP_NO_EXT"):
    try:
        import numpy
        from Cython.Build import cythonize
        from setuptools import Extension

        np_random_lib = os.path.join(os.path.dirname(numpy.__file__), "random", "lib")
        ext_modules = cythonize(
            [
                Extension(
                    "edgeworth_dp._kernels",
                    ["src/edgeworth_dp/_kernels.pyx"],
                    include_dirs=[numpy.get_include()],
                    library_dirs=[np_random_lib],
                    libraries=["npyrandom", "m"],
                    extra_compile_args=["-O3"],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                )
            ],
            compiler_directives=dict(
                language_level="3",
                boundscheck=False,
                wraparound=False,
                cdivision=True,
            ),
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
