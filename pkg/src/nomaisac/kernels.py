"""Selects the compiled grid-search kernel when it was built, the numpy one otherwise."""
from __future__ import annotations

import os

BACKEND = "python"
if os.environ.get("NOMAISAC_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from ._grid_kernel import grid_search  # type: ignore[attr-defined]
        BACKEND = "cython"
    except ImportError:  # extension not built
        from ._grid_kernel_py import grid_search
else:
    from ._grid_kernel_py import grid_search

__all__ = ["grid_search", "BACKEND"]
