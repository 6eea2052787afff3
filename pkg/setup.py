import os

from setuptools import Extension, setup

ext_modules = []
if not os.environ.get("TRISPIN_NO_EXT"):
    import numpy
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "trispin._kernels._mcwf",
                ["src/trispin/_kernels/_mcwf.pyx"],
                extra_compile_args=["-O3"],
                language="c",
                include_dirs=[numpy.get_include()],
            )
        ],
        language_level=3,
    )

setup(ext_modules=ext_modules)
