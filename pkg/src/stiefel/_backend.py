"""Select the kernel backend at import time.

The compiled extension is used when it imports; setting the environment
variable ``STIEFEL_PURE_PYTHON=1`` forces the numpy fallback.
"""
import os

from . import _fallback

if os.environ.get("STIEFEL_PURE_PYTHON", "") not in ("", "0"):
    kernels = _fallback
    NAME = "python"
else:
    try:
        from . import _kernels as kernels
    except ImportError:
        kernels = _fallback
        NAME = "python"
    else:
        NAME = "cython"

expm = kernels.expm
exp_map_core = kernels.exp_map_core
shoot_jacobian = kernels.shoot_jacobian
