"""Build script for the optional compiled kernel module.

Falls back to a pure-Python install when Cython or a compiler is missing;
the package then uses the numpy kernels in ``hyperfill._pykernels``.
"""
from setuptools import setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [
            Extension(
                "hyperfill._ckernels",
                ["src/hyperfill/_ckernels.pyx"],
                include_dirs=[numpy.get_include()],
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
    pass

setup(ext_modules=ext_modules)
