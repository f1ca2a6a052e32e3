# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops over integer-coded Cantor points.

A point at working depth D is an int64 whose most significant of the D low
bits is the first coordinate, so the length of the longest common prefix of
``x`` and ``y`` is ``D - bitlen(x ^ y)``.
"""
import numpy as np
cimport numpy as cnp
from libc.stdint cimport int64_t, uint64_t

cnp.import_array()

cdef extern from *:
    int __builtin_clzll(unsigned long long) nogil


cdef inline int _bitlen(uint64_t x) noexcept nogil:
    if x == 0:
        return 0
    return 64 - __builtin_clzll(x)


def max_xor_bitlen(const int64_t[::1] a, const int64_t[::1] b):
    cdef Py_ssize_t i, n = a.shape[0]
    cdef uint64_t acc = 0
    if b.shape[0] != n:
        raise ValueError("length mismatch")
    with nogil:
        for i in range(n):
            acc |= <uint64_t>(a[i] ^ b[i])
    return _bitlen(acc)


def greedy_match(const int64_t[::1] src, const int64_t[::1] dst):
    cdef Py_ssize_t n = src.shape[0], i, j, best
    cdef int bl, best_bl
    if dst.shape[0] != n:
        raise ValueError("length mismatch")
    out = np.empty(n, dtype=np.int64)
    used_arr = np.zeros(n, dtype=np.uint8)
    cdef int64_t[::1] o = out
    cdef unsigned char[::1] used = used_arr
    with nogil:
        for i in range(n):
            best = -1
            best_bl = 65
            for j in range(n):
                if used[j]:
                    continue
                bl = _bitlen(<uint64_t>(src[i] ^ dst[j]))
                if bl < best_bl:
                    best_bl = bl
                    best = j
                    if bl == 0:
                        break
            used[best] = 1
            o[i] = best
    return out


def trace_search(const int64_t[::1] anchors, const int64_t[:, ::1] perms,
                 const int64_t[::1] xs, int shift, int threshold):
    cdef Py_ssize_t a, v, na = anchors.shape[0], nv = perms.shape[0]
    cdef int64_t y, yg, mask = (<int64_t>1 << shift) - 1
    cdef int ok
    cdef Py_ssize_t found = -1
    with nogil:
        for a in range(na):
            y = anchors[a]
            ok = 1
            for v in range(nv):
                yg = (perms[v, y >> shift] << shift) | (y & mask)
                if _bitlen(<uint64_t>(yg ^ xs[v])) > threshold:
                    ok = 0
                    break
            if ok:
                found = a
                break
    return found


def cell_map(const int64_t[::1] cells, const int64_t[::1] image_cells, Py_ssize_t ncells):
    cdef Py_ssize_t i, n = cells.shape[0]
    cdef int consistent = 1
    out = np.full(ncells, -1, dtype=np.int64)
    cdef int64_t[::1] o = out
    with nogil:
        for i in range(n):
            if o[cells[i]] == -1:
                o[cells[i]] = image_cells[i]
            elif o[cells[i]] != image_cells[i]:
                consistent = 0
                break
    return out, bool(consistent)
