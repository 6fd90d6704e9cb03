"""Pure-Python n-gram hashing backend.

Bit-for-bit identical to the compiled backend in ``_fasthash.pyx``: both
run FNV-1a (64-bit) over the UTF-8 bytes of each character n-gram, with the
seed XOR'd into the offset basis and a murmur3 fmix64 finalizer, then take
the result modulo the bucket count.  All arithmetic is masked to 64 bits.
"""

_MASK = 0xFFFFFFFFFFFFFFFF
_FNV_OFFSET = 14695981039346656037
_FNV_PRIME = 1099511628211


def _fmix64(z: int) -> int:
    z ^= z >> 33
    z = (z * 0xFF51AFD7ED558CCD) & _MASK
    z ^= z >> 33
    z = (z * 0xC4CEB9FE1A85EC53) & _MASK
    z ^= z >> 33
    return z


def fill_bucket_ids(data, offsets, orders, n_buckets, seed, out):
    """Write one bucket id per character n-gram of ``data`` into ``out``.

    ``data`` is the UTF-8 encoding of the (sentinel-wrapped) sentence and
    ``offsets[i]`` the byte offset of its i-th character; ``offsets[-1]``
    is ``len(data)``.  Returns the number of ids written.
    """
    n_chars = len(offsets) - 1
    seed &= _MASK
    basis = _FNV_OFFSET ^ seed
    w = 0
    for order in orders:
        if order < 1 or order > n_chars:
            continue
        for i in range(n_chars - order + 1):
            h = basis
            for byte in data[offsets[i] : offsets[i + order]]:
                h = ((h ^ byte) * _FNV_PRIME) & _MASK
            out[w] = _fmix64(h) % n_buckets
            w += 1
    return w
