"""Build script: compiles the optional Cython kernel extension.

The package is fully functional without the extension (a NumPy fallback is
selected at import time), so a failed compilation only prints a warning.
"""

import sys

from setuptools import Extension, setup


def extensions():
    try:
        import numpy
        from Cython.Build import cythonize
    except ImportError as err:
        print(f"sandflow: skipping compiled kernels ({err})", file=sys.stderr)
        return []
    ext = Extension(
        "sandflow._kernels",
        ["src/sandflow/_kernels.pyx"],
        include_dirs=[numpy.get_include()],
        extra_compile_args=["-O3"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
    try:
        return cythonize([ext], compiler_directives={"language_level": "3"})
    except Exception as err:  # cython failure should not block a pure install
        print(f"sandflow: skipping compiled kernels ({err})", file=sys.stderr)
        return []


setup(ext_modules=extensions())
