"""Hot-loop kernel selection.

The compiled ``_ext`` module is used when it was built; otherwise the numpy
fallback is used. Set ``SHIFTWATCH_PURE_PYTHON=1`` to force the fallback.
"""
from __future__ import annotations

import os

from . import _fallback

if os.environ.get("SHIFTWATCH_PURE_PYTHON", "") not in ("", "0"):
    _impl = _fallback
else:
    try:
        from . import _ext as _impl
    except ImportError:  # extension not built
        _impl = _fallback

BACKEND = "cython" if _impl is not _fallback else "numpy"

gradients = _impl.gradients
hog_window = _impl.hog_window
scan_windows = _impl.scan_windows
warp_affine = _impl.warp_affine


def available_backends() -> dict[str, object]:
    backends: dict[str, object] = {"numpy": _fallback}
    try:
        from . import _ext
    except ImportError:
        pass
    else:
        backends["cython"] = _ext
    return backends
