"""Element-assembly kernels, compiled when available.

The Cython extension ``convexdrum._kernels`` is used if it was built; set
``CONVEXDRUM_PURE_PYTHON=1`` to force the NumPy fallback.
"""

import os

from . import _kernels_py

BACKEND = "python"
if os.environ.get("CONVEXDRUM_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]
        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _kernels_py
else:
    _impl = _kernels_py

p1_triplets = _impl.p1_triplets
p2_triplets = _impl.p2_triplets
