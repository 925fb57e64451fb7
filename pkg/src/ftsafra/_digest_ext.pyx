# cython: language_level=3, boundscheck=False, wraparound=False
"""Compiled FNV-1a (64-bit) over a byte buffer."""

from libc.stdint cimport uint64_t


def fnv1a64(const unsigned char[::1] data not None):
    cdef uint64_t h = 0xCBF29CE484222325ULL
    cdef uint64_t prime = 0x100000001B3ULL
    cdef Py_ssize_t k
    cdef Py_ssize_t n = data.shape[0]
    with nogil:
        for k in range(n):
            h = (h ^ data[k]) * prime
    return h
