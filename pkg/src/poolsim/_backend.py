"""Kernel backend selection.

The compiled extension is preferred when importable; POOLSIM_BACKEND forces
a choice ("cython", "python", or "auto").  Both backends expose the same
four kernel functions with identical semantics, so everything above this
module is backend-agnostic.
"""

from __future__ import annotations

import os

from . import _kernels_py


def _load(choice: str):
    if choice not in ("auto", "cython", "python"):
        raise ValueError(f"POOLSIM_BACKEND must be auto, cython or python, got {choice!r}")
    if choice == "python":
        return _kernels_py
    try:
        from . import _kernels  # compiled extension
        return _kernels
    except ImportError:
        if choice == "cython":
            raise ImportError(
                "POOLSIM_BACKEND=cython but the compiled extension is not built; "
                "run `python setup.py build_ext --inplace` or reinstall"
            )
        return _kernels_py


kernels = _load(os.environ.get("POOLSIM_BACKEND", "auto"))
BACKEND = kernels.BACKEND_NAME


def available_backends() -> dict:
    """Map backend name -> kernel module, for benchmarks and equality tests."""
    out = {"python": _kernels_py}
    try:
        from . import _kernels
        out["cython"] = _kernels
    except ImportError:
        pass
    return out
