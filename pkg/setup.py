"""Builds the optional compiled trial kernel.

If Cython, numpy or a working C compiler is missing the package still
installs and falls back to the pure-Python kernel at import time.  Set
``EXOTENSION_NO_EXTENSION=1`` to skip the build on purpose.
"""
import os

from setuptools import setup
from setuptools.command.build_ext import build_ext


class optional_build_ext(build_ext):
    def run(self):
        try:
            super().run()
        except Exception as exc:  # no compiler, missing headers, ...
            self.warn(f"compiled kernel not built ({exc}); using the pure-Python loop")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            self.warn(f"compiled kernel not built ({exc}); using the pure-Python loop")


ext_modules = []
if not os.environ.get("EXOTENSION_NO_EXTENSION"):
    try:
        import numpy
        from Cython.Build import cythonize
        from setuptools import Extension
    except ImportError:
        pass
    else:
        ext_modules = cythonize(
            [Extension("exotension.plantsim._kernel", ["src/exotension/plantsim/_kernel.pyx"],
                       include_dirs=[numpy.get_include()],
                       # keep a*b+c as two roundings so results match the Python loop
                       extra_compile_args=["-O2", "-ffp-contract=off"])],
            language_level=3,
        )

setup(ext_modules=ext_modules, cmdclass={"build_ext": optional_build_ext})
