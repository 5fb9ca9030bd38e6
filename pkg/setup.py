from setuptools import setup
from setuptools.extension import Extension

# The Metropolis-Hastings sweep kernel is compiled when Cython and a C
# compiler are available; binarygp falls back to a pure-Python twin at
# import time otherwise.  -ffp-contract=off keeps the compiled arithmetic
# bit-identical to the fallback (no FMA contraction).
try:
    from Cython.Build import cythonize

    extensions = cythonize(
        [
            Extension(
                "binarygp._mh_core",
                sources=["src/binarygp/_mh_core.pyx"],
                extra_compile_args=["-O3", "-ffp-contract=off"],
            )
        ],
        language_level="3",
    )
except ImportError:
    extensions = []

setup(ext_modules=extensions)
