# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled n-gram hashing backend.

Must stay bit-for-bit identical to ``_hashing_py.fill_bucket_ids``; the
recipe (FNV-1a 64 over UTF-8 bytes, seed XOR'd into the offset basis,
murmur3 fmix64 finalizer, modulo bucket count) is documented there and in
``hashing.py``.
"""

from libc.stdint cimport int64_t, uint64_t

cdef uint64_t FNV_OFFSET = 14695981039346656037u
cdef uint64_t FNV_PRIME = 1099511628211u


cdef inline uint64_t fmix64(uint64_t z) nogil:
    z ^= z >> 33
    z *= 0xFF51AFD7ED558CCDu
    z ^= z >> 33
    z *= 0xC4CEB9FE1A85EC53u
    z ^= z >> 33
    return z


def fill_bucket_ids(const unsigned char[::1] data,
                    const int64_t[::1] offsets,
                    orders,
                    uint64_t n_buckets,
                    uint64_t seed,
                    int64_t[::1] out):
    """See ``_hashing_py.fill_bucket_ids``; same contract, same output."""
    cdef Py_ssize_t n_chars = offsets.shape[0] - 1
    cdef uint64_t basis = FNV_OFFSET ^ seed
    cdef Py_ssize_t w = 0
    cdef Py_ssize_t i, j, order
    cdef uint64_t h
    for order_obj in orders:
        order = order_obj
        if order < 1 or order > n_chars:
            continue
        with nogil:
            for i in range(n_chars - order + 1):
                h = basis
                for j in range(offsets[i], offsets[i + order]):
                    h = (h ^ data[j]) * FNV_PRIME
                out[w] = <int64_t> (fmix64(h) % n_buckets)
                w += 1
    return w
