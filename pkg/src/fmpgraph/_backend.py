"""Kernel backend selection.

The compiled extension is preferred; set ``FMPGRAPH_BACKEND=python`` to force
the numpy fallback.
"""
import os

from fmpgraph import _pykernels

BACKEND = "python"
kernels = _pykernels

if os.environ.get("FMPGRAPH_BACKEND", "").lower() != "python":
    try:
        from fmpgraph import _ckernels
    except ImportError:
        pass
    else:
        kernels = _ckernels
        BACKEND = "cython"


def available_backends():
    """Name -> kernel module for every backend importable here."""
    out = {"python": _pykernels}
    try:
        from fmpgraph import _ckernels
    except ImportError:
        return out
    out["cython"] = _ckernels
    return out
