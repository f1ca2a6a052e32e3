"""Kernel backend selection.

The compiled module is used when it was built at install time, unless the
environment variable ``ALMOSTACTION_PURE`` is set to a non-empty value.
"""
from __future__ import annotations

import os

from . import _kernels_py

try:
    if os.environ.get("ALMOSTACTION_PURE"):
        raise ImportError("pure backend requested")
    from . import _kernels as _compiled
except ImportError:
    _compiled = None

BACKENDS = {"python": _kernels_py}
if _compiled is not None:
    BACKENDS["compiled"] = _compiled

BACKEND = "compiled" if _compiled is not None else "python"
_impl = BACKENDS[BACKEND]

max_xor_bitlen = _impl.max_xor_bitlen
greedy_match = _impl.greedy_match
trace_search = _impl.trace_search
cell_map = _impl.cell_map


def use(backend: str) -> None:
    """Switch the active backend (``"compiled"`` or ``"python"``)."""
    global BACKEND, _impl, max_xor_bitlen, greedy_match, trace_search, cell_map
    if backend not in BACKENDS:
        raise ValueError(f"backend {backend!r} unavailable; have {sorted(BACKENDS)}")
    BACKEND = backend
    _impl = BACKENDS[backend]
    max_xor_bitlen = _impl.max_xor_bitlen
    greedy_match = _impl.greedy_match
    trace_search = _impl.trace_search
    cell_map = _impl.cell_map
