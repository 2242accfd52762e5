"""Build script for the compiled scoring core.

The extension is optional at runtime: watermax falls back to the pure-Python
backend when the import fails. -ffp-contract=off keeps the C results
bit-identical to the pure backend (no FMA contraction of the polynomial
evaluations).
"""

from Cython.Build import cythonize
from setuptools import Extension, setup

ext = Extension(
    "watermax._core",
    sources=["src/watermax/_core.pyx"],
    language="c++",
    libraries=["crypto"],
    extra_compile_args=["-O2", "-ffp-contract=off"],
)

setup(ext_modules=cythonize([ext], language_level=3))
