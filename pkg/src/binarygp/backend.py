"""Selects the Metropolis-Hastings sweep implementation at import time.

The compiled extension is preferred; the pure-Python fallback is used when
the extension is missing or when ``BINARYGP_BACKEND=python`` is set.  Both
implementations are bit-compatible (see ``benchmarks/mh_backend_bench.py``
for a speed comparison).
"""

import logging
import os

from . import _mh_fallback

log = logging.getLogger("binarygp.backend")

try:
    from . import _mh_core
except ImportError:  # extension not built
    _mh_core = None

_FORCED = os.environ.get("BINARYGP_BACKEND", "").strip().lower()
if _FORCED not in ("", "python", "cython"):
    raise ValueError(f"unknown BINARYGP_BACKEND {_FORCED!r}")
if _FORCED == "cython" and _mh_core is None:
    raise ImportError("BINARYGP_BACKEND=cython but the extension is not built")

if _FORCED == "python" or _mh_core is None:
    _active = _mh_fallback
    ACTIVE_BACKEND = "python"
else:
    _active = _mh_core
    ACTIVE_BACKEND = "cython"

log.debug("MH sweep backend: %s", ACTIVE_BACKEND)


def active_backend():
    """Name of the sweep implementation in use: 'cython' or 'python'."""
    return ACTIVE_BACKEND


def get_impl(name=None):
    """Return a sweep implementation module by name (default: active one)."""
    if name is None:
        return _active
    if name == "python":
        return _mh_fallback
    if name == "cython":
        if _mh_core is None:
            raise ImportError("compiled extension binarygp._mh_core is not built")
        return _mh_core
    raise ValueError(f"unknown backend {name!r}")


def run_sweeps(q, mu, y, eta, qd, sigma2, normals, uniforms):
    """Dispatch to the active implementation."""
    return _active.run_sweeps(q, mu, y, eta, qd, sigma2, normals, uniforms)
