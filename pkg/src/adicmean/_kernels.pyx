# cython: language_level=3
"""Compiled per-digit scans. Signatures mirror ``_kernels_py``."""

import numpy as np
cimport numpy as cnp
from libc.stdint cimport int64_t, uint8_t

cnp.import_array()


def checkpoint_counts(const uint8_t[::1] digits, int radix, const int64_t[::1] positions):
    cdef Py_ssize_t m = positions.shape[0]
    cdef Py_ssize_t n = digits.shape[0]
    out = np.zeros((m, radix), dtype=np.int64)
    cdef int64_t[:, ::1] res = out
    cdef int64_t[64] running
    cdef Py_ssize_t i, j, c
    cdef Py_ssize_t cursor = 0
    cdef int64_t target
    if radix > 64:
        raise ValueError("radix too large for compiled kernel")
    for c in range(radix):
        running[c] = 0
    for j in range(m):
        target = positions[j]
        if target < cursor or target > n:
            raise ValueError("positions must be non-decreasing and within the digit buffer")
        for i in range(cursor, target):
            running[digits[i]] += 1
        cursor = target
        for c in range(radix):
            res[j, c] = running[c]
    return out


def parse_ascii(const uint8_t[::1] buf, int radix):
    cdef Py_ssize_t n = buf.shape[0]
    out = np.empty(n, dtype=np.uint8)
    cdef uint8_t[::1] res = out
    cdef Py_ssize_t i
    cdef int d
    for i in range(n):
        d = <int>buf[i] - 48
        if d < 0 or d >= radix:
            return out[:i], i
        res[i] = <uint8_t>d
    return out, -1


def pack2(const uint8_t[::1] digits):
    cdef Py_ssize_t n = digits.shape[0]
    cdef Py_ssize_t nbytes = (n + 3) // 4
    out = np.zeros(nbytes, dtype=np.uint8)
    cdef uint8_t[::1] res = out
    cdef Py_ssize_t i
    for i in range(n):
        res[i >> 2] |= <uint8_t>((digits[i] & 3) << ((i & 3) << 1))
    return out.tobytes()


def unpack2(const uint8_t[::1] data, Py_ssize_t count):
    if count > data.shape[0] * 4:
        raise ValueError("packed payload shorter than digit count")
    out = np.empty(count, dtype=np.uint8)
    cdef uint8_t[::1] res = out
    cdef Py_ssize_t i
    for i in range(count):
        res[i] = (data[i >> 2] >> ((i & 3) << 1)) & 3
    return out


def prefix_codes(const uint8_t[:, ::1] points, int max_rank, int radix):
    cdef Py_ssize_t n = points.shape[0]
    if max_rank > points.shape[1]:
        raise ValueError("points shorter than max_rank")
    out = np.empty((n, max_rank), dtype=np.int64)
    cdef int64_t[:, ::1] res = out
    cdef Py_ssize_t i, r
    cdef int64_t code
    for i in range(n):
        code = 0
        for r in range(max_rank):
            code = code * radix + points[i, r]
            res[i, r] = code
    return out
