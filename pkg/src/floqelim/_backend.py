"""Kernel selection.

The compiled extension is used when it imports; otherwise the numpy fallback.
Set ``FLOQELIM_BACKEND=python`` to force the fallback.
"""
import os

from . import _chain_fallback

BACKENDS = {"python": _chain_fallback}

try:
    from . import _chain_kernels
except ImportError:  # extension not built
    _chain_kernels = None
else:
    BACKENDS["compiled"] = _chain_kernels

_requested = os.environ.get("FLOQELIM_BACKEND", "").strip().lower()
if _requested and _requested not in BACKENDS:
    raise ImportError(
        f"FLOQELIM_BACKEND={_requested!r} unavailable; choose from {sorted(BACKENDS)}"
    )
BACKEND_NAME = _requested or ("compiled" if _chain_kernels is not None else "python")
kernels = BACKENDS[BACKEND_NAME]


def get_kernels(name=None):
    """Return the kernel module ``name`` (default: the active backend)."""
    if name is None:
        return kernels
    try:
        return BACKENDS[name]
    except KeyError:
        raise ValueError(f"unknown backend {name!r}; available: {sorted(BACKENDS)}") from None
