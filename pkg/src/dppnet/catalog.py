"""Item catalog and canonical subsets.

A catalog is a bijection between external item identifiers (strings) and
dense indices ``0..n-1``.  Subsets of the catalog are represented as sorted
tuples of indices, so two subsets with the same members compare equal.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .errors import InvalidSubsetError

Subset = tuple[int, ...]


@dataclass(frozen=True)
class Catalog:
    """Bijection between external item ids and dense indices."""

    ids: tuple[str, ...]
    index: dict[str, int] = field(repr=False)

    @classmethod
    def from_ids(cls, ids: Iterable[str]) -> "Catalog":
        ids = tuple(ids)
        index = {item: i for i, item in enumerate(ids)}
        if len(index) != len(ids):
            raise ValueError("duplicate item ids in catalog")
        return cls(ids=ids, index=index)

    @property
    def size(self) -> int:
        return len(self.ids)

    def to_indices(self, items: Iterable[str]) -> Subset:
        unknown = [item for item in items if item not in self.index]
        if unknown:
            raise KeyError(f"unknown item ids: {unknown}")
        return canonical_subset((self.index[item] for item in items), self.size)

    def to_ids(self, indices: Iterable[int]) -> list[str]:
        return [self.ids[i] for i in indices]


def canonical_subset(indices: Iterable[int], size: int) -> Subset:
    """Sort and validate a subset of catalog indices.

    Raises :class:`InvalidSubsetError` on duplicates or out-of-range indices,
    so the result is order-canonical: permutations of the same members map to
    the same tuple.
    """
    members = sorted(int(i) for i in indices)
    for i in members:
        if i < 0 or i >= size:
            raise InvalidSubsetError(f"index {i} outside catalog of size {size}")
    for a, b in zip(members, members[1:]):
        if a == b:
            raise InvalidSubsetError(f"duplicate index {a} in subset")
    return tuple(members)


def complement(subset: Sequence[int], size: int) -> list[int]:
    """Indices of the catalog not present in ``subset``."""
    members = set(subset)
    return [i for i in range(size) if i not in members]
