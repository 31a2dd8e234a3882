"""Backend selection for the hot loops.

The compiled extension is used when it imports; otherwise the numpy/scipy
versions take over. Set ``GRANDCANON_PURE_PYTHON=1`` to force the fallback.
"""

import os

from grandcanon import _pykernels

if os.environ.get("GRANDCANON_PURE_PYTHON", "") not in ("", "0"):
    _impl = _pykernels
else:
    try:
        from grandcanon import _ckernels as _impl
    except ImportError:
        _impl = _pykernels

BACKEND = "cython" if _impl is not _pykernels else "python"

cross_pairs = _impl.cross_pairs
internal_pairs = _impl.internal_pairs
project_polytope = _impl.project_polytope

__all__ = ["BACKEND", "cross_pairs", "internal_pairs", "project_polytope"]
