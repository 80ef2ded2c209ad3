"""Build script for the optional compiled kernel extension.

The package works without the extension (a pure-Python backend is selected
at import time), so a failed compile downgrades to a warning rather than
aborting the install.

-ffp-contract=off keeps the compiled kernels bit-identical to the
pure-Python backend: fused multiply-adds would round differently.
"""

import os

from setuptools import Extension, setup

try:
    if not os.path.exists("src/cardfolio/_kernels/_native.pyx"):
        raise ImportError("kernel source not present")
    from Cython.Build import cythonize
    import numpy as np

    extensions = cythonize(
        [
            Extension(
                "cardfolio._kernels._native",
                ["src/cardfolio/_kernels/_native.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3", "-ffp-contract=off"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
    for ext in extensions:
        ext.optional = True
except ImportError:
    extensions = []

setup(ext_modules=extensions)
