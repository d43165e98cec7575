"""Kernel backend selection.

The compiled core is used when it imports cleanly. Set ``EVSHIELD_BACKEND=python``
to force the numpy fallback (``compiled`` makes a missing extension an error).
"""
import logging
import os

from . import _fallback

logger = logging.getLogger(__name__)

_requested = os.environ.get("EVSHIELD_BACKEND", "auto").lower()
if _requested not in ("auto", "python", "compiled"):
    raise ImportError(f"EVSHIELD_BACKEND must be auto, python or compiled, got {_requested!r}")

_compiled = None
if _requested != "python":
    try:
        from . import _kernels as _compiled
    except ImportError:
        if _requested == "compiled":
            raise
        logger.debug("compiled kernels unavailable, using numpy fallback")

kernels = _compiled if _compiled is not None else _fallback
BACKEND = "compiled" if _compiled is not None else "python"


def available_backends():
    """Names of kernel modules importable in this environment."""
    names = ["python"]
    if _compiled is not None:
        names.append("compiled")
    return names


def get_kernels(name=None):
    if name is None:
        return kernels
    if name == "python":
        return _fallback
    if name == "compiled":
        if _compiled is None:
            raise RuntimeError("compiled kernels are not built")
        return _compiled
    raise ValueError(f"unknown backend {name!r}")
