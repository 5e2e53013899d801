import os

import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

ext_modules = []
if cythonize is not None and not os.environ.get("QUADQBD_NO_EXT"):
    ext_modules = cythonize(
        [
            Extension(
                "quadqbd._ckernels",
                ["src/quadqbd/_ckernels.pyx"],
                include_dirs=[np.get_include()],
            )
        ],
        compiler_directives={"language_level": 3},
    )

setup(ext_modules=ext_modules)
