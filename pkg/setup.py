from setuptools import Extension, setup

# The compiled kernels are optional: without Cython (or on a failed build)
# the package falls back to the numpy reference kernels at import time.
try:
    import numpy
    from Cython.Build import cythonize

    extensions = cythonize(
        [
            Extension(
                "xva.kernels._convext",
                ["src/xva/kernels/_convext.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    )
except ImportError:
    extensions = []

setup(ext_modules=extensions)
