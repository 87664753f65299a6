"""Kernel backend selection.

The compiled extension is preferred when present; the numpy implementation is
the fallback. Set REPSAMPLE_BACKEND=python or =c to force one (forcing the
compiled backend raises if the extension is not built). Both backends draw
identical index streams for the same inputs, so the choice only affects speed.
"""

import os

_requested = os.environ.get("REPSAMPLE_BACKEND", "auto").lower()

if _requested in ("auto", "", "c", "compiled"):
    try:
        from . import _ckernels as _impl

        BACKEND = "c"
    except ImportError:
        if _requested in ("c", "compiled"):
            raise ImportError(
                "REPSAMPLE_BACKEND=c but the compiled extension is not available"
            ) from None
        from . import _pykernels as _impl

        BACKEND = "python"
elif _requested in ("python", "py"):
    from . import _pykernels as _impl

    BACKEND = "python"
else:
    raise ImportError(f"unknown REPSAMPLE_BACKEND value: {_requested!r}")

weighted_wor = _impl.weighted_wor
kdpp_items = _impl.kdpp_items

__all__ = ["weighted_wor", "kdpp_items", "BACKEND"]
