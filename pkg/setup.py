"""Build script.

The package is pure Python; the rank/concordance kernels additionally ship
as an optional C extension (covaudit.kernels._speedups). Building the
extension requires Cython and a C compiler, and failure to build it must
never break installation: covaudit.kernels falls back to the pure-Python
implementation at import time.
"""
import logging

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext

log = logging.getLogger(__name__)


class optional_build_ext(build_ext):
    """build_ext that downgrades every compiler failure to a warning."""

    def run(self):
        try:
            super().run()
        except Exception as exc:  # missing compiler, broken toolchain
            self._skip(exc)

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            self._skip(exc)

    @staticmethod
    def _skip(exc):
        log.warning("skipping optional speedup extension: %s", exc)


def extensions():
    try:
        from Cython.Build import cythonize
    except ImportError:
        return []
    ext = Extension(
        "covaudit.kernels._speedups",
        sources=["src/covaudit/kernels/_speedups.pyx"],
    )
    return cythonize([ext], language_level="3")


setup(ext_modules=extensions(), cmdclass={"build_ext": optional_build_ext})
