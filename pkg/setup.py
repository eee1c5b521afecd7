"""Build script for the optional compiled kernels.

The package is fully functional without the extension: polarshape.kernels
falls back to pure-numpy implementations when the compiled module is
missing (no Cython, no C compiler, or the build failed).
"""
from setuptools import Extension, setup


def make_extensions():
    try:
        import numpy as np
        from Cython.Build import cythonize
    except ImportError:
        return []
    ext = Extension(
        "polarshape.kernels._native",
        ["src/polarshape/kernels/_native.pyx"],
        include_dirs=[np.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
    try:
        return cythonize([ext], compiler_directives={"language_level": "3"})
    except Exception:
        return []


setup(ext_modules=make_extensions())
