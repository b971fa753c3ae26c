"""Backend selection for the hot kernels.

The compiled extension is used when it was built; setting the environment
variable ``DMRISK_PURE_PYTHON=1`` forces the numpy fallback.
"""
from __future__ import annotations

import os

from dmrisk import _pykernels

if os.environ.get("DMRISK_PURE_PYTHON", "") not in ("", "0"):
    _impl = _pykernels
else:
    try:
        from dmrisk import _ckernels as _impl  # type: ignore[no-redef]
    except ImportError:  # extension not built
        _impl = _pykernels

BACKEND: str = _impl.BACKEND
OK = _pykernels.OK
NO_BRACKET = _pykernels.NO_BRACKET

project_simplex = _impl.project_simplex
pbar_eval = _impl.pbar_eval
saa_point = _impl.saa_point
saa_grid = _impl.saa_grid

__all__ = ["BACKEND", "OK", "NO_BRACKET", "project_simplex", "pbar_eval", "saa_point", "saa_grid", "backends"]


def backends() -> dict:
    """All importable kernel modules keyed by name (used by tests and benchmarks)."""
    out = {"python": _pykernels}
    try:
        from dmrisk import _ckernels

        out["cython"] = _ckernels
    except ImportError:
        pass
    return out
