"""Backend selection for the mean-field kernels.

The compiled extension is used when it imports; otherwise the numpy version.
Set ``KERRSSH_PURE_PYTHON=1`` to force the fallback.
"""
import os

from . import _kernels_py

if os.environ.get("KERRSSH_PURE_PYTHON", "") not in ("", "0"):
    _impl = _kernels_py
else:
    try:
        from . import _kernels as _impl
    except ImportError:
        _impl = _kernels_py

BACKEND = "cython" if _impl is not _kernels_py else "python"
rhs = _impl.rhs
rk4_evolve = _impl.rk4_evolve
