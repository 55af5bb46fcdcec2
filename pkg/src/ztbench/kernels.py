"""Backend selection for the engine kernel.

The compiled extension is used when it imports; otherwise the pure-Python
twin. Set ``ZTBENCH_PURE_PYTHON=1`` to force the fallback.
"""
import os

from . import _kernels_py

if os.environ.get("ZTBENCH_PURE_PYTHON", "") not in ("", "0"):
    _impl = _kernels_py
else:
    try:
        from . import _kernels as _impl
    except ImportError:
        _impl = _kernels_py

BACKEND = "python" if _impl is _kernels_py else "cython"
BASELINE = _kernels_py.BASELINE
SECUREBANK = _kernels_py.SECUREBANK


def get_backend(name=None):
    """Return the kernel module for ``name`` ("cython", "python" or None for default)."""
    if name is None:
        return _impl
    if name == "python":
        return _kernels_py
    if name == "cython":
        from . import _kernels
        return _kernels
    raise ValueError(f"unknown kernel backend {name!r}")


def run_engine(*args, backend=None):
    return get_backend(backend).run_engine(*args)
