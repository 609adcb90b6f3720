"""Build hook for the optional compiled grid-search kernel.

Without Cython (or a C compiler) the package still installs and falls back to
the numpy implementation at import time.
"""
from setuptools import setup

try:
    import numpy
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [Extension("nomaisac._grid_kernel", ["src/nomaisac/_grid_kernel.pyx"],
                   include_dirs=[numpy.get_include()], extra_compile_args=["-O3"])],
        language_level=3,
    )
except ImportError:
    ext_modules = []

setup(ext_modules=ext_modules)
