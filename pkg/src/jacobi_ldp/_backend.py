"""Pick the compiled sweep kernel when it is importable, the pure-Python one otherwise.

Set ``JACOBI_LDP_BACKEND=python`` to force the fallback.
"""

from __future__ import annotations

import os

from . import _kernels_py

BACKEND = "python"
run_sweeps = _kernels_py.run_sweeps

if os.environ.get("JACOBI_LDP_BACKEND", "").lower() != "python":
    try:
        from . import _kernels  # type: ignore[attr-defined]
    except ImportError:
        pass
    else:
        run_sweeps = _kernels.run_sweeps
        BACKEND = "cython"


def get_kernel(name: str | None = None):
    """Return ``(name, run_sweeps)`` for ``"cython"``, ``"python"`` or the default."""
    if name is None:
        return BACKEND, run_sweeps
    if name == "python":
        return "python", _kernels_py.run_sweeps
    if name == "cython":
        from . import _kernels  # type: ignore[attr-defined]

        return "cython", _kernels.run_sweeps
    raise ValueError(f"unknown backend {name!r}")
