"""Seeded 64-bit hashing of character n-grams into feature buckets.

The hash of an n-gram is FNV-1a (64-bit) over its UTF-8 bytes with the
seed XOR'd into the offset basis, passed through the murmur3 fmix64
avalanche, then reduced modulo the bucket count:

    h = 14695981039346656037 ^ (seed & (2^64-1))
    for each byte b:  h = ((h ^ b) * 1099511628211) mod 2^64
    h = fmix64(h);    bucket = h mod n_buckets

Two interchangeable backends implement the inner loop: a Cython extension
(``_fasthash``) and a pure-Python twin (``_hashing_py``).  The compiled one
is preferred at import time; set ``BITEXTKIT_HASH_BACKEND=pure`` (or
``compiled``) to force a choice.  Outputs are bit-identical either way.
"""

from __future__ import annotations

import os

import numpy as np

from ._hashing_py import fill_bucket_ids as _fill_pure

try:
    from ._fasthash import fill_bucket_ids as _fill_compiled
except ImportError:
    _fill_compiled = None

_MASK = 0xFFFFFFFFFFFFFFFF


def _select_backend() -> tuple[str, object]:
    forced = os.environ.get("BITEXTKIT_HASH_BACKEND", "").strip().lower()
    if forced == "pure":
        return "pure", _fill_pure
    if forced == "compiled":
        if _fill_compiled is None:
            raise ImportError(
                "BITEXTKIT_HASH_BACKEND=compiled but the _fasthash extension "
                "is not built"
            )
        return "compiled", _fill_compiled
    if forced:
        raise ValueError(f"unknown BITEXTKIT_HASH_BACKEND {forced!r}")
    if _fill_compiled is not None:
        return "compiled", _fill_compiled
    return "pure", _fill_pure


BACKEND, _fill = _select_backend()


def available_backends() -> tuple[str, ...]:
    return ("pure",) if _fill_compiled is None else ("compiled", "pure")


def _char_byte_offsets(data: bytes) -> np.ndarray:
    """Byte offset of each code point in UTF-8 ``data``, plus the end offset.

    Code points start at every byte that is not a UTF-8 continuation byte
    (0b10xxxxxx), so no decoding pass is needed.
    """
    raw = np.frombuffer(data, dtype=np.uint8)
    starts = np.flatnonzero((raw & 0xC0) != 0x80)
    return np.append(starts, len(data)).astype(np.int64)


def ngram_bucket_ids(
    text: str,
    orders: tuple[int, ...],
    n_buckets: int,
    seed: int,
    backend=None,
) -> np.ndarray:
    """Bucket ids of all character n-grams of ``text``, one per occurrence.

    ``text`` is hashed as-is (callers add sentinels).  Orders that exceed
    the character length contribute nothing.  Returns int64 ids in
    [0, n_buckets); deterministic for fixed (text, orders, n_buckets, seed).
    """
    if n_buckets < 1:
        raise ValueError("n_buckets must be >= 1")
    if not text:
        return np.empty(0, dtype=np.int64)
    data = text.encode("utf-8")
    if len(data) == len(text):  # pure ASCII: offsets are trivial
        offsets = np.arange(len(text) + 1, dtype=np.int64)
    else:
        offsets = _char_byte_offsets(data)
    n_chars = len(offsets) - 1
    orders = tuple(sorted(set(int(o) for o in orders)))
    total = sum(n_chars - o + 1 for o in orders if 1 <= o <= n_chars)
    out = np.empty(total, dtype=np.int64)
    fill = _fill if backend is None else backend
    written = fill(data, offsets, orders, n_buckets, seed & _MASK, out)
    return out[:written]
