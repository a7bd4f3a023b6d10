"""Build the optional compiled kernels.

The package works without them; ``bose_ldp._backend`` falls back to the
pure-Python implementation when the extension is missing.
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
                "bose_ldp._kernels",
                ["src/bose_ldp/_kernels.pyx"],
                include_dirs=[numpy.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                # No fast-math or FMA contraction: the chain must match the
                # Python fallback bit for bit.
                extra_compile_args=["-O3", "-ffp-contract=off"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
