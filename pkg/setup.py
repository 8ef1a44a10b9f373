"""Builds the optional compiled convolution core.

The package is fully functional without the extension (a numpy fallback is
selected at import time); building it just makes training faster.
"""

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    ext_modules = []
else:
    ext_modules = cythonize(
        [
            Extension(
                "jsslkit._kernels._convcore",
                ["src/jsslkit/_kernels/_convcore.pyx"],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
