"""Select the compiled kernels when available, else the pure-Python ones.

Set JJDRIVE_PURE_PYTHON=1 to force the fallback.
"""

import os

from . import _pykernels

BACKEND = "python"
nodal_sweep = _pykernels.nodal_sweep
ordered_product = _pykernels.ordered_product

if not os.environ.get("JJDRIVE_PURE_PYTHON"):
    try:
        from . import _fastcore
    except ImportError:
        pass
    else:
        nodal_sweep = _fastcore.nodal_sweep
        ordered_product = _fastcore.ordered_product
        BACKEND = "cython"
