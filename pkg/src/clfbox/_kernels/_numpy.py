"""Pure-numpy implementations of the bitmap kernels.

Bitmaps are little-endian packed ``uint64`` arrays: instance ``i`` lives in
bit ``i % 64`` of word ``i // 64``. Slack bits past ``n - 1`` in the last
word must be zero; every producer below guarantees that.

The compiled backend in ``_native.pyx`` implements the same signatures; the
two are interchangeable and cross-checked in the test suite.
"""

from __future__ import annotations

import numpy as np

BACKEND = "numpy"


def n_words(n: int) -> int:
    return (n + 63) >> 6


def zeros(n: int) -> np.ndarray:
    return np.zeros(n_words(n), dtype=np.uint64)


def pack_mask(mask: np.ndarray) -> np.ndarray:
    """Pack a boolean/uint8 mask of length n into uint64 words."""
    packed = np.packbits(mask.astype(np.uint8, copy=False), bitorder="little")
    pad = (-packed.size) % 8
    if pad:
        packed = np.concatenate([packed, np.zeros(pad, dtype=np.uint8)])
    return packed.view(np.uint64)


def popcount(words: np.ndarray) -> int:
    return int(np.bitwise_count(words).sum())


def popcount_and(a: np.ndarray, b: np.ndarray) -> int:
    return int(np.bitwise_count(a & b).sum())


def members(words: np.ndarray, n: int) -> np.ndarray:
    """Indices of the set bits, ascending, as int64."""
    bits = np.unpackbits(words.view(np.uint8), count=n, bitorder="little")
    return np.flatnonzero(bits).astype(np.int64)


def filter_eq(codes: np.ndarray, value: int, n: int) -> np.ndarray:
    return pack_mask(codes == value)


def filter_range(values: np.ndarray, lo: float, hi: float, include_hi: bool, n: int) -> np.ndarray:
    if include_hi:
        mask = (values >= lo) & (values <= hi)
    else:
        mask = (values >= lo) & (values < hi)
    return pack_mask(mask)


def masked_bincount(codes: np.ndarray, words: np.ndarray, n_bins: int, n: int) -> np.ndarray:
    """Histogram of codes over the bitmap's members; negative codes are skipped."""
    sel = codes[members(words, n)]
    sel = sel[sel >= 0]
    return np.bincount(sel, minlength=n_bins).astype(np.int64)


def confusion_counts(actual: np.ndarray, pred: np.ndarray, words: np.ndarray, n_labels: int, n: int) -> np.ndarray:
    """Flattened l*l confusion counts (row = actual) over the bitmap's members."""
    idx = members(words, n)
    flat = actual[idx].astype(np.int64) * n_labels + pred[idx]
    return np.bincount(flat, minlength=n_labels * n_labels).astype(np.int64)
