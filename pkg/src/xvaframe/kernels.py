"""Kernel backend selection.

The compiled extension is used when it imports; otherwise the numpy
fallback. ``XVA_KERNELS=python`` forces the fallback.
"""

from __future__ import annotations

import os
from types import ModuleType

from xvaframe import _kernels_py


def _load_compiled() -> ModuleType | None:
    try:
        from xvaframe import _kernels
    except ImportError:
        return None
    return _kernels


_COMPILED = _load_compiled()


def get_backend(name: str | None = None) -> ModuleType:
    """Return the kernel module for ``name`` ("compiled" or "python")."""
    if name is None:
        name = os.environ.get("XVA_KERNELS", "compiled" if _COMPILED is not None else "python")
    if name == "python":
        return _kernels_py
    if name == "compiled":
        if _COMPILED is None:
            raise ImportError("compiled kernels are not built; install with the Cython extension")
        return _COMPILED
    raise ValueError(f"unknown kernel backend {name!r}")


def available_backends() -> list[str]:
    return ["compiled", "python"] if _COMPILED is not None else ["python"]


backend = get_backend()
BACKEND = "python" if backend is _kernels_py else "compiled"

philox4x32 = backend.philox4x32
philox_normals = backend.philox_normals
black_forward = backend.black_forward
split_weighted_sum = backend.split_weighted_sum
