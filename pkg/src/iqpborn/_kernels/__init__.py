"""Kernel backend selection: compiled Cython core with a NumPy fallback.

The compiled extension is preferred when importable. Set IQPBORN_BACKEND to
"fallback" (or "compiled") to force a choice; forcing "compiled" raises if
the extension is unavailable.
"""

import os

_requested = os.environ.get("IQPBORN_BACKEND", "").strip().lower()

if _requested in ("", "compiled"):
    try:
        from . import _core as _impl

        BACKEND = "compiled"
    except ImportError:
        if _requested == "compiled":
            raise
        from . import _fallback as _impl

        BACKEND = "fallback"
elif _requested in ("fallback", "pure", "numpy"):
    from . import _fallback as _impl

    BACKEND = "fallback"
else:
    raise ValueError(f"unknown IQPBORN_BACKEND={_requested!r}")

mc_corr = _impl.mc_corr
exact_corr = _impl.exact_corr
exact_corr_batch = _impl.exact_corr_batch
exact_loss_batch = _impl.exact_loss_batch


def get_backend(name=None):
    """Return the module implementing the kernel API ('compiled'/'fallback')."""
    if name in (None, ""):
        return _impl
    if name == "fallback":
        from . import _fallback

        return _fallback
    if name == "compiled":
        from . import _core

        return _core
    raise ValueError(f"unknown backend {name!r}")
