"""Kernel selection: compiled extension when importable, pure Python otherwise.

Set ``RADIALGREEN_PURE_PYTHON=1`` to force the fallback.
"""
import importlib
import os

from . import _fallback


def load(name=None):
    """Return the kernel module for ``name`` ('cython', 'python' or None for auto)."""
    if name == "python":
        return _fallback
    if name == "cython":
        return importlib.import_module("radialgreen._kernels")
    if os.environ.get("RADIALGREEN_PURE_PYTHON", "") not in ("", "0"):
        return _fallback
    try:
        return importlib.import_module("radialgreen._kernels")
    except ImportError:
        return _fallback


kernels = load()
BACKEND = "python" if kernels is _fallback else "cython"
integrate_radial = kernels.integrate_radial
tridiag_solve = kernels.tridiag_solve


def available():
    """Names of the kernel backends that can be loaded in this environment."""
    names = ["python"]
    try:
        load("cython")
        names.append("cython")
    except ImportError:
        pass
    return names
