"""Selects the box kernels at import: compiled when built, else pure Python.

Set ``FWPORTION_PURE=1`` to force the pure-Python kernels.
"""
import os
from types import ModuleType

from fwportion import _pykernels

try:
    if os.environ.get("FWPORTION_PURE"):
        raise ImportError("pure-Python kernels requested")
    from fwportion import _kernels as _compiled
except ImportError:
    _compiled = None

kernels: ModuleType = _compiled if _compiled is not None else _pykernels
name = "cython" if _compiled is not None else "python"


def available():
    return ["python"] + (["cython"] if _compiled is not None else [])


def use(backend: str) -> None:
    """Switch kernels process-wide (benchmarks and tests)."""
    global kernels, name
    if backend == "python":
        kernels = _pykernels
    elif backend == "cython":
        if _compiled is None:
            raise RuntimeError("compiled kernels are not built")
        kernels = _compiled
    else:
        raise ValueError(f"unknown backend {backend!r}")
    name = backend
