# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled bitmap kernels.

Same contracts as ``_numpy.py``: little-endian packed uint64 bitmaps, slack
bits zero. The loops here fuse predicate evaluation / counting with the
bitmap walk so no index arrays are materialized.
"""

import numpy as np

from libc.stdint cimport int32_t, int64_t, uint8_t, uint64_t

cdef extern from *:
    """
    #define POPCNT64(x) __builtin_popcountll(x)
    #define CTZ64(x) __builtin_ctzll(x)
    """
    int POPCNT64(uint64_t x) nogil
    int CTZ64(uint64_t x) nogil

BACKEND = "native"


def n_words(n):
    return (n + 63) >> 6


def zeros(n):
    return np.zeros((n + 63) >> 6, dtype=np.uint64)


def pack_mask(mask):
    cdef const uint8_t[::1] m = np.ascontiguousarray(mask, dtype=np.uint8)
    cdef Py_ssize_t n = m.shape[0]
    out = np.zeros((n + 63) >> 6, dtype=np.uint64)
    cdef uint64_t[::1] w = out
    cdef Py_ssize_t i
    with nogil:
        for i in range(n):
            if m[i]:
                w[i >> 6] |= (<uint64_t>1) << (i & 63)
    return out


def popcount(words):
    cdef const uint64_t[::1] w = words
    cdef Py_ssize_t i
    cdef int64_t total = 0
    with nogil:
        for i in range(w.shape[0]):
            total += POPCNT64(w[i])
    return total


def popcount_and(a, b):
    cdef const uint64_t[::1] wa = a
    cdef const uint64_t[::1] wb = b
    cdef Py_ssize_t i
    cdef int64_t total = 0
    with nogil:
        for i in range(wa.shape[0]):
            total += POPCNT64(wa[i] & wb[i])
    return total


def members(words, n):
    cdef const uint64_t[::1] w = words
    cdef int64_t count = popcount(words)
    out = np.empty(count, dtype=np.int64)
    cdef int64_t[::1] o = out
    cdef Py_ssize_t i, k = 0
    cdef uint64_t word
    with nogil:
        for i in range(w.shape[0]):
            word = w[i]
            while word:
                o[k] = (i << 6) + CTZ64(word)
                k += 1
                word &= word - 1
    return out


def filter_eq(codes, value, n):
    cdef const int32_t[::1] c = codes
    cdef int32_t v = value
    out = np.zeros((n + 63) >> 6, dtype=np.uint64)
    cdef uint64_t[::1] w = out
    cdef Py_ssize_t i
    with nogil:
        for i in range(c.shape[0]):
            if c[i] == v:
                w[i >> 6] |= (<uint64_t>1) << (i & 63)
    return out


def filter_range(values, lo, hi, include_hi, n):
    cdef const double[::1] vals = values
    cdef double flo = lo, fhi = hi
    cdef bint closed = include_hi
    out = np.zeros((n + 63) >> 6, dtype=np.uint64)
    cdef uint64_t[::1] w = out
    cdef Py_ssize_t i
    cdef double x
    with nogil:
        for i in range(vals.shape[0]):
            x = vals[i]
            if x >= flo and (x < fhi or (closed and x == fhi)):
                w[i >> 6] |= (<uint64_t>1) << (i & 63)
    return out


def masked_bincount(codes, words, n_bins, n):
    cdef const int32_t[::1] c = codes
    cdef const uint64_t[::1] w = words
    out = np.zeros(n_bins, dtype=np.int64)
    cdef int64_t[::1] o = out
    cdef Py_ssize_t i, idx
    cdef uint64_t word
    cdef int32_t code
    with nogil:
        for i in range(w.shape[0]):
            word = w[i]
            while word:
                idx = (i << 6) + CTZ64(word)
                code = c[idx]
                if code >= 0:
                    o[code] += 1
                word &= word - 1
    return out


def confusion_counts(actual, pred, words, n_labels, n):
    cdef const int32_t[::1] a = actual
    cdef const int32_t[::1] p = pred
    cdef const uint64_t[::1] w = words
    cdef int32_t l = n_labels
    out = np.zeros(l * l, dtype=np.int64)
    cdef int64_t[::1] o = out
    cdef Py_ssize_t i, idx
    cdef uint64_t word
    with nogil:
        for i in range(w.shape[0]):
            word = w[i]
            while word:
                idx = (i << 6) + CTZ64(word)
                o[a[idx] * l + p[idx]] += 1
                word &= word - 1
    return out
