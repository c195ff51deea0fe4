# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops: splitmix64 sign streams and fused encode/accumulate/score.

Every kernel is integer-only so the compiled and numpy paths agree bit for bit.
"""
import numpy as np

cimport numpy as cnp
from libc.stdint cimport int8_t, int32_t, int64_t, uint64_t
from libc.stdlib cimport calloc, free

cnp.import_array()

cdef uint64_t GOLDEN_GAMMA = 0x9E3779B97F4A7C15ULL


cdef inline uint64_t _mix(uint64_t z) noexcept nogil:
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL
    return z ^ (z >> 31)


def item_signs(uint64_t seed, Py_ssize_t offset, Py_ssize_t count):
    out = np.empty(count, dtype=np.int8)
    cdef int8_t[::1] view = out
    cdef Py_ssize_t i
    cdef uint64_t state
    with nogil:
        for i in range(count):
            state = seed + <uint64_t>(offset + i + 1) * GOLDEN_GAMMA
            view[i] = 1 if (_mix(state) & 1ULL) else -1
    return out


# work on TILE-wide column blocks so the class rows being touched stay in cache
cdef Py_ssize_t TILE = 2048


cdef inline void _encode_row(const int32_t[:, ::1] levels, Py_ssize_t n,
                             const int8_t[:, ::1] id_hvs,
                             const int8_t[:, ::1] level_hvs,
                             int32_t* row, Py_ssize_t lo, Py_ssize_t hi) noexcept nogil:
    """Columns ``[lo, hi)`` of the encoding of row ``n``, written to ``row[0:hi-lo]``."""
    cdef Py_ssize_t i, j
    cdef Py_ssize_t m = id_hvs.shape[0]
    cdef Py_ssize_t w = hi - lo
    cdef const int8_t* idp
    cdef const int8_t* lvp
    for i in range(w):
        row[i] = 0
    for j in range(m):
        idp = &id_hvs[j, lo]
        lvp = &level_hvs[levels[n, j], lo]
        for i in range(w):
            row[i] += idp[i] * lvp[i]


cdef int32_t* _row_buffer(Py_ssize_t d) except NULL:
    cdef int32_t* row = <int32_t*>calloc(min(d, TILE) if d > 0 else 1, sizeof(int32_t))
    if row == NULL:
        raise MemoryError()
    return row


def encode_rows(const int32_t[:, ::1] levels, const int8_t[:, ::1] id_hvs,
                const int8_t[:, ::1] level_hvs):
    cdef Py_ssize_t n_rows = levels.shape[0]
    cdef Py_ssize_t d = id_hvs.shape[1]
    out = np.empty((n_rows, d), dtype=np.int64)
    cdef int64_t[:, ::1] view = out
    cdef int32_t* row = _row_buffer(d)
    cdef Py_ssize_t n, i, lo, hi
    try:
        with nogil:
            lo = 0
            while lo < d:
                hi = min(lo + TILE, d)
                for n in range(n_rows):
                    _encode_row(levels, n, id_hvs, level_hvs, row, lo, hi)
                    for i in range(hi - lo):
                        view[n, lo + i] = row[i]
                lo = hi
    finally:
        free(row)
    return out


def class_sums(const int32_t[:, ::1] levels, const int64_t[::1] labels,
               const int8_t[:, ::1] id_hvs, const int8_t[:, ::1] level_hvs,
               Py_ssize_t num_classes):
    cdef Py_ssize_t n_rows = levels.shape[0]
    cdef Py_ssize_t d = id_hvs.shape[1]
    out = np.zeros((num_classes, d), dtype=np.int64)
    cdef int64_t[:, ::1] view = out
    cdef int32_t* row = _row_buffer(d)
    cdef Py_ssize_t n, i, lo, hi
    cdef int64_t* acc
    try:
        with nogil:
            lo = 0
            while lo < d:
                hi = min(lo + TILE, d)
                for n in range(n_rows):
                    _encode_row(levels, n, id_hvs, level_hvs, row, lo, hi)
                    acc = &view[labels[n], lo]
                    for i in range(hi - lo):
                        acc[i] += row[i]
                lo = hi
    finally:
        free(row)
    return out


def query_dots(const int32_t[:, ::1] levels, const int8_t[:, ::1] id_hvs,
               const int8_t[:, ::1] level_hvs, const int64_t[:, ::1] class_hvs):
    cdef Py_ssize_t n_rows = levels.shape[0]
    cdef Py_ssize_t d = id_hvs.shape[1]
    cdef Py_ssize_t k = class_hvs.shape[0]
    out = np.zeros((n_rows, k), dtype=np.int64)
    cdef int64_t[:, ::1] view = out
    cdef int32_t* row = _row_buffer(d)
    cdef Py_ssize_t n, c, i, lo, hi
    cdef int64_t s
    cdef const int64_t* cp
    try:
        with nogil:
            lo = 0
            while lo < d:
                hi = min(lo + TILE, d)
                for n in range(n_rows):
                    _encode_row(levels, n, id_hvs, level_hvs, row, lo, hi)
                    for c in range(k):
                        cp = &class_hvs[c, lo]
                        s = 0
                        for i in range(hi - lo):
                            s += row[i] * cp[i]
                        view[n, c] += s
                lo = hi
    finally:
        free(row)
    return out
