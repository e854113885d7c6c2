"""Kernel backend selection.

The compiled extension is preferred; ``PSJNET_BACKEND=python`` forces the
numpy fallback.  ``use()`` switches at runtime (benchmarks, parity tests).
"""

import os

from . import _kernels_py

try:
    from . import _kernels_ext
except ImportError:  # extension not built
    _kernels_ext = None

_BACKENDS = {"python": _kernels_py}
if _kernels_ext is not None:
    _BACKENDS["compiled"] = _kernels_ext


def available():
    return sorted(_BACKENDS)


def _default():
    want = os.environ.get("PSJNET_BACKEND", "").strip().lower()
    if want:
        if want not in _BACKENDS:
            raise ImportError(f"PSJNET_BACKEND={want!r} is not available (have {available()})")
        return _BACKENDS[want]
    return _BACKENDS.get("compiled", _kernels_py)


_active = _default()


def active():
    return _active


def use(name):
    """Select the kernel backend by name; returns the previous name."""
    global _active
    if name not in _BACKENDS:
        raise ValueError(f"backend {name!r} not available (have {available()})")
    prev = _active.NAME
    _active = _BACKENDS[name]
    return prev
