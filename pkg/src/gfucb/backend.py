"""Selects the two-layer kernel backend at import time.

Prefers the compiled extension (`gfucb._twolayer_c`) and falls back to the
numpy implementation. Set GFUCB_FORCE_NUMPY=1 to force the fallback, which
is useful for parity checks and benchmarking.
"""
import os

from . import _twolayer_np

if os.environ.get("GFUCB_FORCE_NUMPY"):
    kernels = _twolayer_np
    BACKEND = "numpy"
else:
    try:
        from . import _twolayer_c as kernels

        BACKEND = "compiled"
    except ImportError:
        kernels = _twolayer_np
        BACKEND = "numpy"


def backend_name():
    return BACKEND
