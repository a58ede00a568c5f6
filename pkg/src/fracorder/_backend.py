"""Kernel backend selection: compiled extension when available, numpy otherwise.

Set FRACORDER_PURE_PYTHON=1 to force the numpy fallback (used by the
benchmark and the backend-equivalence tests).
"""

import os

if os.environ.get("FRACORDER_PURE_PYTHON"):
    from . import _kernels_py as kernels

    BACKEND = "python"
else:
    try:
        from . import _kernels as kernels  # type: ignore[attr-defined]

        BACKEND = "compiled"
    except ImportError:
        from . import _kernels_py as kernels

        BACKEND = "python"

__all__ = ["kernels", "BACKEND"]
