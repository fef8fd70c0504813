"""Build script.

The compiled kernel is an optional accelerator: if Cython or a C compiler is
missing the package installs anyway and falls back to the pure-Python kernel
at import time.
"""

import sys

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class optional_build_ext(build_ext):
    def run(self):
        try:
            super().run()
        except Exception as exc:  # compiler missing, etc.
            print(f"warning: building the compiled kernel failed ({exc}); "
                  "gossiplab will use the pure-Python fallback", file=sys.stderr)

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            print(f"warning: {ext.name} failed to build ({exc}); "
                  "gossiplab will use the pure-Python fallback", file=sys.stderr)


def extensions():
    try:
        from Cython.Build import cythonize
    except ImportError:
        return []
    ext = Extension(
        "gossiplab._kernels._core",
        ["src/gossiplab/_kernels/_core.pyx"],
    )
    return cythonize([ext], compiler_directives={"language_level": "3"})


setup(ext_modules=extensions(), cmdclass={"build_ext": optional_build_ext})
