import os

import numpy as np
from setuptools import Extension, setup

# The compiled kernels are optional: vemfhn.kernels falls back to numpy when
# the extension is missing, so a failed build must not abort installation.
try:
    from Cython.Build import cythonize
except ImportError:  # pragma: no cover
    cythonize = None

ext_modules = []
if cythonize is not None and not os.environ.get("VEMFHN_NO_EXT"):
    ext_modules = cythonize(
        [
            Extension(
                "vemfhn._ckernels",
                ["src/vemfhn/_ckernels.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
