"""Select the compiled kernels when available, else the pure-Python ones.

Set ``OTDA_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _fallback

if os.environ.get("OTDA_PURE_PYTHON", "") not in ("", "0"):
    kernels = _fallback
    BACKEND = "python"
else:
    try:
        from . import _kernels as kernels
        BACKEND = "compiled"
    except ImportError:
        kernels = _fallback
        BACKEND = "python"

STATUS_OPTIMAL = _fallback.STATUS_OPTIMAL
STATUS_MAX_ITER = _fallback.STATUS_MAX_ITER

__all__ = ["kernels", "BACKEND", "STATUS_OPTIMAL", "STATUS_MAX_ITER"]
