"""Backend selection for the boosting kernels.

The compiled extension is used when it imports cleanly; setting
``AFSBM_PURE_PYTHON=1`` forces the NumPy fallback.
"""
import os

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py

if not os.environ.get("AFSBM_PURE_PYTHON"):
    try:
        from . import _kernels as _compiled
    except ImportError:  # extension not built
        _compiled = None
    if _compiled is not None:
        _impl = _compiled
        BACKEND = "cython"

build_histogram = _impl.build_histogram
find_best_split = _impl.find_best_split
predict_ensemble = _impl.predict_ensemble
grow_tree = _impl.grow_tree


def get_backend(name=None):
    """Return the kernel module for ``name`` ('cython' or 'python'); default is the active one."""
    if name is None:
        return _impl
    if name == "python":
        return _kernels_py
    if name == "cython":
        from . import _kernels

        return _kernels
    raise ValueError(f"unknown kernel backend {name!r}")
