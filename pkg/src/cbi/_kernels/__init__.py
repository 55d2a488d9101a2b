"""Hot loops, compiled when available.

The Cython extension is used if it imports; otherwise (or with
``CBI_PURE_PYTHON=1``) the pure-Python versions are used.  Both draw from
numpy's C distribution functions in the same order, so a given generator state
produces the same path with either backend.
"""
import os

from . import _pure

if os.environ.get("CBI_PURE_PYTHON"):
    _impl = _pure
    BACKEND = "python"
else:
    try:
        from . import _ext as _impl

        BACKEND = "cython"
    except ImportError:
        _impl = _pure
        BACKEND = "python"

neumaier_sum = _impl.neumaier_sum
centered_cross = _impl.centered_cross
affine_recursion = _impl.affine_recursion
euler_thinning_path = _impl.euler_thinning_path

__all__ = ["BACKEND", "neumaier_sum", "centered_cross", "affine_recursion", "euler_thinning_path"]
