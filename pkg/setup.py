"""Build script for the optional compiled kernels.

The Cython extension is optional: if Cython, numpy or scipy headers are
missing, or compilation fails, the package installs without it and the
pure-numpy fallback in ``stiefel._fallback`` is used at import time.
"""
from setuptools import Extension, setup

ext_modules = []
try:
    import numpy as np
    from Cython.Build import cythonize
except ImportError:  # pragma: no cover - build environment dependent
    pass
else:
    ext_modules = cythonize(
        [
            Extension(
                "stiefel._kernels",
                ["src/stiefel/_kernels.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"],
                optional=True,
            )
        ],
        compiler_directives={
            "language_level": "3",
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
        },
    )

setup(ext_modules=ext_modules)
