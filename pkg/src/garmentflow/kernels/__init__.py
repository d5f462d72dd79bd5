"""Hot-kernel dispatch: compiled extension when built, numpy/scipy fallback otherwise.

Set ``GARMENTFLOW_PURE_PYTHON=1`` to force the fallback (used by the
benchmark to compare backends).
"""

import os

from . import fallback

if os.environ.get("GARMENTFLOW_PURE_PYTHON"):
    _impl = fallback
else:
    try:
        from . import _native as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = fallback

BACKEND = "native" if _impl is not fallback else "fallback"

pairwise_sqdist = _impl.pairwise_sqdist
solve_assignment = _impl.solve_assignment
nn_sqdist = _impl.nn_sqdist
farthest_points = _impl.farthest_points

__all__ = [
    "BACKEND",
    "fallback",
    "farthest_points",
    "nn_sqdist",
    "pairwise_sqdist",
    "solve_assignment",
]
