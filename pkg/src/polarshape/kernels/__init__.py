"""Hot inner loops with a compiled core and a pure-Python fallback.

Two kernels live here: the z-buffer triangle rasterizer and the BFS
normal-disambiguation pass. Both are data-dependent loops that numpy cannot
fully vectorize. At import time the Cython extension is preferred; when it
is unavailable the numpy/pure-Python fallback is used. Both backends produce
identical outputs (tested), so everything above this package is
backend-agnostic.
"""
from . import _fallback

try:
    from . import _native as _impl
    BACKEND = "native"
except ImportError:
    _impl = _fallback
    BACKEND = "python"

rasterize_depth = _impl.rasterize_depth
propagate_choice = _impl.propagate_choice


def available_backends():
    """Mapping of backend name -> kernel module, for tests and benchmarks."""
    out = {"python": _fallback}
    if BACKEND == "native":
        out["native"] = _impl
    return out
