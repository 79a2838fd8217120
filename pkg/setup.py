import os

from setuptools import Extension, setup

ext_modules = []
if not os.environ.get("JJDRIVE_NO_EXT"):
    try:
        import numpy as np
        from Cython.Build import cythonize
    except ImportError:
        pass
    else:
        ext_modules = cythonize(
            [Extension("jjdrive._fastcore", ["src/jjdrive/_fastcore.pyx"],
                       include_dirs=[np.get_include()], optional=True)],
            language_level=3,
        )

setup(ext_modules=ext_modules)
