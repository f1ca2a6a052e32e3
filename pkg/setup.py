"""Build the optional Cython kernels.

If Cython or a C compiler is unavailable the package still installs and
falls back to the numpy implementations in ``almostaction._kernels_py``.
"""
import os

from setuptools import setup
from setuptools.command.build_ext import build_ext


class optional_build_ext(build_ext):
    def run(self):
        try:
            super().run()
        except Exception as exc:  # noqa: BLE001
            print(f"warning: Cython kernels not built ({exc}); using numpy fallback")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:  # noqa: BLE001
            print(f"warning: failed to build {ext.name} ({exc}); using numpy fallback")


def _extensions():
    if os.environ.get("ALMOSTACTION_NO_EXT"):
        return []
    try:
        import numpy
        from Cython.Build import cythonize
        from setuptools import Extension
    except ImportError:
        return []
    ext = Extension(
        "almostaction._kernels",
        ["src/almostaction/_kernels.pyx"],
        include_dirs=[numpy.get_include()],
        extra_compile_args=["-O3"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
    return cythonize([ext], compiler_directives={"language_level": "3"}, quiet=True)


setup(ext_modules=_extensions(), cmdclass={"build_ext": optional_build_ext})
