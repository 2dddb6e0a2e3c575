"""Inference kernels with two interchangeable backends.

``numba``  per-sample loops compiled with ``@njit``; adaptive inference
           really stops walking trees once the policy fires.
``numpy``  vectorized over samples and trees; every tree is walked and the
           stop point is found afterwards, with identical results.

The backend is picked by the ``ADARF_BACKEND`` environment variable
(``numba`` by default, ``numpy`` to force the fallback). Every entry point
also accepts an explicit ``backend=`` argument.
"""
from __future__ import annotations

import os
import warnings

from . import _numpy

KIND_FULL = 0
KIND_AGG_MAX = 1
KIND_AGG_SM = 2
KIND_LAST_SM = 3
KIND_QWYC = 4

# status codes returned by the kernels
OK = 0
BAD_NODE = 1
BAD_FEATURE = 2
BAD_LEAF = 3
CYCLE = 4

STATUS_TEXT = {
    BAD_NODE: "node index escapes the FOREST array",
    BAD_FEATURE: "feature index outside the input vector",
    BAD_LEAF: "leaf row escapes the LEAVES array",
    CYCLE: "walk exceeded the node count (cyclic links)",
}

_compiled = None
_numba_error = None


def _load_numba():
    global _compiled, _numba_error
    if _compiled is None and _numba_error is None:
        try:
            import importlib

            _compiled = importlib.import_module(f"{__name__}._numba")
        except ImportError as exc:  # pragma: no cover - depends on the environment
            _numba_error = exc
    return _compiled


def default_backend() -> str:
    name = os.environ.get("ADARF_BACKEND", "numba").strip().lower()
    if name not in ("numba", "numpy"):
        raise ValueError(f"ADARF_BACKEND must be 'numba' or 'numpy', got {name!r}")
    return name


def get(backend: str | None = None):
    """Kernel module for ``backend`` (falls back to numpy if numba is missing)."""
    name = backend or default_backend()
    if name == "numpy":
        return _numpy
    if name != "numba":
        raise ValueError(f"unknown backend {name!r}")
    mod = _load_numba()
    if mod is None:
        warnings.warn(f"numba unavailable ({_numba_error}); using the numpy kernels")
        return _numpy
    return mod
