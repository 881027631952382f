"""Select the kernel backend at import time.

The compiled extension is preferred.  Set ``FRACSHE_BACKEND=python`` to force
the numpy fallback (useful for benchmarking and cross-checking).
"""

from __future__ import annotations

import os

from . import _pykernels

_requested = os.environ.get("FRACSHE_BACKEND", "auto").lower()

kernels = _pykernels
if _requested != "python":
    try:
        from . import _ckernels as kernels  # type: ignore[no-redef]
    except ImportError:
        if _requested == "cython":
            raise
        kernels = _pykernels

BACKEND = kernels.NAME
