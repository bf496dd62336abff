"""Build the optional Cython kernels; the package works without them."""

import numpy as np
from Cython.Build import cythonize
from setuptools import Extension, setup

extensions = [
    Extension(
        "qtp.kernels._ckernels",
        ["src/qtp/kernels/_ckernels.pyx"],
        include_dirs=[np.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        # keep cos and sin as separate libm calls: fusing them into sincos changes
        # the last bit on some inputs and breaks parity with the numpy fallback
        extra_compile_args=["-O3", "-fno-builtin-sin", "-fno-builtin-cos", "-ffp-contract=off"],
        optional=True,
    )
]

setup(ext_modules=cythonize(extensions, language_level=3))
