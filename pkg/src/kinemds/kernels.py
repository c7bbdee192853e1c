"""Backend selection for the hot loops.

The compiled extension is used when it imports; otherwise (or when the
environment variable ``KINEMDS_PURE_PYTHON=1`` is set) the numpy fallback
is used. Both expose ``polyfit_links``, ``lyapunov_matrix`` and
``generalized_lyapunov_matrix``.
"""

from __future__ import annotations

import importlib
import os
from types import ModuleType

__all__ = ["BACKEND", "available_backends", "get_backend", "impl"]


def _load_compiled() -> ModuleType | None:
    try:
        return importlib.import_module("kinemds._kernels")
    except ImportError:
        return None


def available_backends() -> list[str]:
    names = ["python"]
    if _load_compiled() is not None:
        names.insert(0, "cython")
    return names


def get_backend(name: str) -> ModuleType:
    if name == "python":
        return importlib.import_module("kinemds._pykernels")
    if name == "cython":
        mod = _load_compiled()
        if mod is None:
            raise ImportError("compiled kernels are not built")
        return mod
    raise ValueError(f"unknown backend {name!r}")


if os.environ.get("KINEMDS_PURE_PYTHON", "") == "1" or _load_compiled() is None:
    BACKEND = "python"
else:
    BACKEND = "cython"
impl = get_backend(BACKEND)
