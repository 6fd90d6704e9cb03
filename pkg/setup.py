"""Build script: compiles the optional hashing kernel.

The compiled extension is a pure speedup; if Cython or a C compiler is
unavailable the install proceeds and the package falls back to the
pure-Python hashing backend at import time.  Set BITEXTKIT_PURE=1 to skip
the extension build explicitly.
"""

import os
import sys

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class optional_build_ext(build_ext):
    """build_ext that degrades to a warning instead of failing the install."""

    def run(self):
        try:
            super().run()
        except Exception as exc:  # compiler missing, etc.
            self._warn(exc)

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            self._warn(exc)

    @staticmethod
    def _warn(exc):
        print(
            f"warning: building the bitextkit._fasthash extension failed ({exc}); "
            "falling back to the pure-Python hashing backend",
            file=sys.stderr,
        )


ext_modules = []
cmdclass = {}
if os.environ.get("BITEXTKIT_PURE") != "1":
    try:
        from Cython.Build import cythonize

        ext_modules = cythonize(
            [Extension("bitextkit._fasthash", ["src/bitextkit/_fasthash.pyx"])],
            language_level=3,
        )
        cmdclass["build_ext"] = optional_build_ext
    except ImportError:
        print(
            "warning: Cython not available; installing with the pure-Python "
            "hashing backend",
            file=sys.stderr,
        )

setup(ext_modules=ext_modules, cmdclass=cmdclass)
