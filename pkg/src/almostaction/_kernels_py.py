"""numpy implementations of the kernels in ``_kernels.pyx``.

Results are identical to the compiled versions; only speed differs.
"""
from __future__ import annotations

import numpy as np


def _bitlen(x: np.ndarray) -> np.ndarray:
    # frexp is exact below 2**53, which bounds every supported depth
    return np.frexp(x.astype(np.float64))[1].astype(np.int64)


def max_xor_bitlen(a: np.ndarray, b: np.ndarray) -> int:
    if a.shape[0] != b.shape[0]:
        raise ValueError("length mismatch")
    if a.shape[0] == 0:
        return 0
    return int(np.bitwise_or.reduce(np.bitwise_xor(a, b))).bit_length()


def greedy_match(src: np.ndarray, dst: np.ndarray) -> np.ndarray:
    n = src.shape[0]
    if dst.shape[0] != n:
        raise ValueError("length mismatch")
    out = np.empty(n, dtype=np.int64)
    free = np.ones(n, dtype=bool)
    for i in range(n):
        bl = _bitlen(np.bitwise_xor(dst, src[i]))
        bl[~free] = 65
        j = int(np.argmin(bl))
        free[j] = False
        out[i] = j
    return out


def trace_search(anchors, perms, xs, shift: int, threshold: int) -> int:
    mask = (1 << shift) - 1
    alive = np.ones(anchors.shape[0], dtype=bool)
    for v in range(perms.shape[0]):
        yg = (perms[v][anchors >> shift] << shift) | (anchors & mask)
        alive &= _bitlen(np.bitwise_xor(yg, xs[v])) <= threshold
        if not alive.any():
            return -1
    hits = np.flatnonzero(alive)
    return int(hits[0]) if hits.size else -1


def cell_map(cells, image_cells, ncells: int):
    out = np.full(ncells, -1, dtype=np.int64)
    if cells.shape[0] == 0:
        return out, True
    out[cells] = image_cells
    return out, bool(np.all(out[cells] == image_cells))
