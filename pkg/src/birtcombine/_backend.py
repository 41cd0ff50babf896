"""Pick the kernel implementation once, at import time.

Set ``BIRTCOMBINE_PURE_PYTHON=1`` to force the numpy fallback even when the
compiled extension is present.
"""

from __future__ import annotations

import os

from . import _kernels_py

if os.environ.get("BIRTCOMBINE_PURE_PYTHON"):
    kernels = _kernels_py
    NAME = "python"
else:
    try:
        from . import _kernels as kernels  # type: ignore[no-redef]

        NAME = "cython"
    except ImportError:
        kernels = _kernels_py
        NAME = "python"


def available() -> dict:
    """All importable backends by name (used by tests and the benchmark)."""
    found = {"python": _kernels_py}
    try:
        from . import _kernels

        found["cython"] = _kernels
    except ImportError:
        pass
    return found
