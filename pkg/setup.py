# Builds the optional compiled MLP kernel. The package works without it
# (pure-numpy fallback is selected at import), so a failed extension build
# is not fatal: install with TRAJAUDIT_SKIP_EXT=1 to skip compilation.
import os

from setuptools import setup

ext_modules = []
if not os.environ.get("TRAJAUDIT_SKIP_EXT"):
    import numpy as np
    from Cython.Build import cythonize
    from setuptools.extension import Extension

    ext_modules = cythonize(
        [
            Extension(
                "trajaudit._ckern",
                ["src/trajaudit/_ckern.pyx"],
                include_dirs=[np.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                extra_compile_args=["-O3"],
            )
        ],
        language_level=3,
    )

setup(ext_modules=ext_modules)
