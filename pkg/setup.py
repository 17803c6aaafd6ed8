"""Builds the optional compiled cut-norm kernel.

The package works without it (a numpy fallback is selected at import time),
but the exhaustive cut-norm scan is the hot loop of everything downstream,
so the extension is built by default.
"""

from setuptools import Extension, setup
from Cython.Build import cythonize

extensions = [
    Extension(
        "cutdecomp.kernels._cutnorm",
        ["src/cutdecomp/kernels/_cutnorm.pyx"],
        extra_compile_args=["-O3"],
    ),
]

setup(
    ext_modules=cythonize(
        extensions,
        compiler_directives={"language_level": "3"},
    ),
)
