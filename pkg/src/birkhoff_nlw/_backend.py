"""Kernel selection.

The compiled extension is used when it imports; set
``BIRKHOFF_NLW_PURE_PYTHON=1`` to force the numpy fallback.
"""
import os

from . import _pykernels

BACKEND = "python"
poly_eval_grad = _pykernels.poly_eval_grad
scan_min_divisor = _pykernels.scan_min_divisor

if os.environ.get("BIRKHOFF_NLW_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels
    except ImportError:  # extension not built
        _kernels = None
    if _kernels is not None:
        BACKEND = "compiled"
        poly_eval_grad = _kernels.poly_eval_grad
        scan_min_divisor = _kernels.scan_min_divisor


def get(name, backend=None):
    """Return kernel ``name`` from an explicit backend (``"python"``/``"compiled"``)."""
    if backend is None:
        return globals()[name]
    if backend == "python":
        return getattr(_pykernels, name)
    if backend == "compiled":
        from . import _kernels as mod

        return getattr(mod, name)
    raise ValueError(f"unknown backend {backend!r}")


def compiled_available():
    try:
        from . import _kernels  # noqa: F401
    except ImportError:
        return False
    return True
