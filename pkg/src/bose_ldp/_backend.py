"""Select the compiled kernels when available, else the Python fallback.

Set ``BOSE_LDP_BACKEND=python`` to force the fallback.
"""

import os

from . import _fallback

fallback = _fallback

if os.environ.get("BOSE_LDP_BACKEND", "").strip().lower() == "python":
    kernels = _fallback
    NAME = "python"
else:
    try:
        from . import _kernels as kernels  # type: ignore[attr-defined]

        NAME = "cython"
    except ImportError:
        kernels = _fallback
        NAME = "python"

compiled = None
if NAME == "cython":
    compiled = kernels
else:
    try:
        from . import _kernels as compiled  # type: ignore[no-redef]
    except ImportError:
        compiled = None

lambert_w_array = kernels.lambert_w_array
lambert_sums = kernels.lambert_sums
metropolis_run = kernels.metropolis_run
