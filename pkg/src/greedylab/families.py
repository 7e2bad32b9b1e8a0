"""Finite set families on {1..n}, stored as integer bitmasks (bit i-1 <-> coordinate i)."""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Iterable

import numpy as np

__all__ = [
    "SetFamily",
    "mask_of",
    "members",
    "popcounts",
    "indicator",
    "indicator_matrix",
    "all_subsets",
    "schreier_family",
    "initial_segments",
    "subsets_of_size",
    "subset_max",
]


def mask_of(coords: Iterable[int]) -> int:
    """Bitmask of a set of 1-based coordinates."""
    m = 0
    for i in coords:
        m |= 1 << (i - 1)
    return m


def members(mask: int) -> list[int]:
    out, i = [], 1
    while mask:
        if mask & 1:
            out.append(i)
        mask >>= 1
        i += 1
    return out


def popcounts(n: int) -> np.ndarray:
    """|A| for every mask A in 0..2^n-1."""
    pc = np.zeros(1 << n, dtype=np.int64)
    for b in range(n):
        pc[1 << b: 1 << (b + 1)] = pc[: 1 << b] + 1
    return pc


def indicator(mask: int, n: int) -> np.ndarray:
    return np.array([(mask >> i) & 1 for i in range(n)], dtype=float)


def indicator_matrix(masks: Iterable[int], n: int) -> np.ndarray:
    masks = np.asarray(list(masks), dtype=np.int64)
    return ((masks[:, None] >> np.arange(n)) & 1).astype(float)


def subsets_of_size(n: int, k: int) -> list[int]:
    return [mask_of(c) for c in combinations(range(1, n + 1), k)]


def subset_max(values: np.ndarray, n: int) -> np.ndarray:
    """out[M] = max over submasks A of M of values[A] (sum-over-subsets transform)."""
    out = np.array(values, dtype=float, copy=True)
    idx = np.arange(1 << n)
    for b in range(n):
        hi = idx[(idx >> b) & 1 == 1]
        out[hi] = np.maximum(out[hi], out[hi ^ (1 << b)])
    return out


@dataclass(frozen=True)
class SetFamily:
    """A finite family of nonempty subsets of {1..n}."""

    n: int
    masks: tuple[int, ...]

    def __post_init__(self):
        full = (1 << self.n) - 1
        for m in self.masks:
            if m <= 0 or m & ~full:
                raise ValueError(f"mask {m} is not a nonempty subset of 1..{self.n}")

    def __len__(self) -> int:
        return len(self.masks)

    def __iter__(self):
        return iter(self.masks)

    def __contains__(self, mask: int) -> bool:
        return mask in self._set

    @property
    def _set(self) -> frozenset:
        return frozenset(self.masks)

    def sizes(self) -> list[int]:
        return [bin(m).count("1") for m in self.masks]

    def has_all_sizes(self) -> bool:
        return set(self.sizes()) >= set(range(1, self.n + 1))

    def is_full(self) -> bool:
        return len(set(self.masks)) == (1 << self.n) - 1

    def largest_member_within(self) -> np.ndarray:
        """out[E] = max |A| over members A subset of E (0 if none)."""
        vals = np.zeros(1 << self.n)
        for m in self.masks:
            vals[m] = bin(m).count("1")
        return subset_max(vals, self.n)

    def to_lists(self) -> list[list[int]]:
        return [members(m) for m in self.masks]

    @classmethod
    def from_lists(cls, n: int, sets: Iterable[Iterable[int]]) -> "SetFamily":
        return cls(n, tuple(sorted({mask_of(s) for s in sets})))


def all_subsets(n: int) -> SetFamily:
    return SetFamily(n, tuple(range(1, 1 << n)))


def schreier_family(n: int) -> SetFamily:
    """Nonempty A in {1..n} with |A| <= min A."""
    masks = []
    for m in range(1, 1 << n):
        low = (m & -m).bit_length()
        if bin(m).count("1") <= low:
            masks.append(m)
    return SetFamily(n, tuple(masks))


def initial_segments(n: int, with_singletons: bool = True) -> SetFamily:
    masks = {(1 << k) - 1 for k in range(1, n + 1)}
    if with_singletons:
        masks |= {1 << i for i in range(n)}
    return SetFamily(n, tuple(sorted(masks)))
