"""Build script for the optional compiled kernels.

The Cython extension links against numpy's static ``npyrandom`` library so the
compiled kernels draw from the exact same distributions as ``numpy.random.Generator``.
If compilation fails the package still installs and uses the pure-Python kernels.
"""
import os
import sys

from setuptools import setup
from setuptools.command.build_ext import build_ext


class OptionalBuildExt(build_ext):
    def run(self):
        try:
            super().run()
        except Exception as exc:  # pragma: no cover - depends on toolchain
            sys.stderr.write(f"warning: compiled kernels not built ({exc}); using pure Python\n")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:  # pragma: no cover - depends on toolchain
            sys.stderr.write(f"warning: failed to build {ext.name} ({exc}); using pure Python\n")


def extensions():
    if os.environ.get("CBI_NO_EXTENSION"):
        return []
    try:
        import numpy as np
        from Cython.Build import cythonize
    except ImportError:
        return []
    from setuptools import Extension

    np_dir = os.path.dirname(np.__file__)
    ext = Extension(
        "cbi._kernels._ext",
        ["src/cbi/_kernels/_ext.pyx"],
        include_dirs=[np.get_include()],
        library_dirs=[os.path.join(np_dir, "random", "lib")],
        libraries=["npyrandom", "m"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        # no -ffast-math: results must match the Python kernels bit for bit
        extra_compile_args=["-O3", "-ffp-contract=off"],
    )
    return cythonize([ext], compiler_directives={"language_level": "3"})


setup(ext_modules=extensions(), cmdclass={"build_ext": OptionalBuildExt})
