"""Compact instance sets.

An :class:`InstanceSet` is an immutable membership set over the dense index
universe ``0..n-1``, stored as a packed uint64 bitmap. It is the common
currency for every subset in the engine: query results, selections, scopes,
and view boxes all reduce to these.
"""

from __future__ import annotations

from typing import Iterable, Iterator

import numpy as np

from . import _kernels as K
from .errors import UniverseMismatch

_COMBINE_OPS = ("union", "intersection", "difference", "symmetric_difference")


class InstanceSet:
    __slots__ = ("universe_size", "_words", "_count")

    def __init__(self, universe_size: int, words: np.ndarray):
        if words.dtype != np.uint64 or words.shape != (K.n_words(universe_size),):
            raise ValueError("words must be a packed uint64 array of the right length")
        words = np.ascontiguousarray(words)
        words.flags.writeable = False
        self.universe_size = universe_size
        self._words = words
        self._count: int | None = None

    # -- constructors ----------------------------------------------------

    @classmethod
    def empty(cls, universe_size: int) -> "InstanceSet":
        return cls(universe_size, K.zeros(universe_size))

    @classmethod
    def full(cls, universe_size: int) -> "InstanceSet":
        return cls.from_mask(np.ones(universe_size, dtype=np.uint8))

    @classmethod
    def from_mask(cls, mask: np.ndarray) -> "InstanceSet":
        return cls(len(mask), K.pack_mask(np.asarray(mask)))

    @classmethod
    def from_indices(cls, universe_size: int, indices: Iterable[int]) -> "InstanceSet":
        idx = np.fromiter(indices, dtype=np.int64)
        if idx.size and (idx.min() < 0 or idx.max() >= universe_size):
            raise UniverseMismatch(
                f"instance index out of range for universe of size {universe_size}"
            )
        mask = np.zeros(universe_size, dtype=np.uint8)
        mask[idx] = 1
        return cls.from_mask(mask)

    # -- introspection ---------------------------------------------------

    @property
    def words(self) -> np.ndarray:
        return self._words

    def cardinality(self) -> int:
        if self._count is None:
            self._count = int(K.popcount(self._words))
        return self._count

    def __len__(self) -> int:
        return self.cardinality()

    def indices(self) -> np.ndarray:
        return K.members(self._words, self.universe_size)

    def to_mask(self) -> np.ndarray:
        mask = np.zeros(self.universe_size, dtype=bool)
        mask[self.indices()] = True
        return mask

    def __contains__(self, i: int) -> bool:
        if not 0 <= i < self.universe_size:
            return False
        return bool((int(self._words[i >> 6]) >> (i & 63)) & 1)

    def __iter__(self) -> Iterator[int]:
        return iter(self.indices().tolist())

    def __eq__(self, other) -> bool:
        if not isinstance(other, InstanceSet):
            return NotImplemented
        return self.universe_size == other.universe_size and bool(
            np.array_equal(self._words, other._words)
        )

    def __hash__(self) -> int:
        return hash((self.universe_size, self._words.tobytes()))

    def __repr__(self) -> str:
        return f"InstanceSet(n={self.universe_size}, size={self.cardinality()})"

    # -- algebra ----------------------------------------------------------

    def _check(self, other: "InstanceSet") -> None:
        if self.universe_size != other.universe_size:
            raise UniverseMismatch(
                f"universe sizes differ: {self.universe_size} != {other.universe_size}"
            )

    def union(self, other: "InstanceSet") -> "InstanceSet":
        self._check(other)
        return InstanceSet(self.universe_size, self._words | other._words)

    def intersection(self, other: "InstanceSet") -> "InstanceSet":
        self._check(other)
        return InstanceSet(self.universe_size, self._words & other._words)

    def difference(self, other: "InstanceSet") -> "InstanceSet":
        self._check(other)
        return InstanceSet(self.universe_size, self._words & ~other._words)

    def symmetric_difference(self, other: "InstanceSet") -> "InstanceSet":
        self._check(other)
        return InstanceSet(self.universe_size, self._words ^ other._words)

    def complement(self, within: "InstanceSet | None" = None) -> "InstanceSet":
        """Complement within `within` (default: the full universe)."""
        if within is None:
            within = InstanceSet.full(self.universe_size)
        return within.difference(self)

    def intersect_count(self, other: "InstanceSet") -> int:
        self._check(other)
        return int(K.popcount_and(self._words, other._words))

    __or__ = union
    __and__ = intersection
    __sub__ = difference
    __xor__ = symmetric_difference


def combine(a: InstanceSet, b: InstanceSet, op: str) -> InstanceSet:
    """Binary set algebra with explicit operation names."""
    if op not in _COMBINE_OPS:
        raise ValueError(f"unknown set operation {op!r}; expected one of {_COMBINE_OPS}")
    return getattr(a, op)(b)
