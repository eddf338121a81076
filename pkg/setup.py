"""Builds the optional compiled kernels.

The package works without them (numpy fallbacks are selected at import);
compiling just makes top-k selection and scatter-add faster.
"""

from setuptools import setup

try:
    import numpy as np
    from setuptools import Extension
    from Cython.Build import cythonize

    extensions = cythonize(
        [
            Extension(
                "samsa.kernels._ckernels",
                ["src/samsa/kernels/_ckernels.pyx"],
                include_dirs=[np.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={
            "language_level": 3,
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
        },
    )
except ImportError:
    extensions = []

setup(ext_modules=extensions)
