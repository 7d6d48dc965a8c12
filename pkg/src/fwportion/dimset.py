"""Per-field value sets: sorted, merged lists of inclusive integer intervals."""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Iterator, Sequence, Tuple

Interval = Tuple[int, int]


class Relation(str, Enum):
    EQUAL = "EQUAL"
    SUBSET = "SUBSET"
    SUPERSET = "SUPERSET"
    PARTIAL = "PARTIAL"
    DISJOINT = "DISJOINT"


def merge_intervals(intervals: Iterable[Interval]) -> Tuple[Interval, ...]:
    """Sort, drop empties and merge overlapping or adjacent intervals."""
    out: list = []
    for lo, hi in sorted(iv for iv in intervals if iv[0] <= iv[1]):
        if out and lo <= out[-1][1] + 1:
            if hi > out[-1][1]:
                out[-1][1] = hi
        else:
            out.append([lo, hi])
    return tuple((lo, hi) for lo, hi in out)


@dataclass(frozen=True)
class DimSet:
    """Value set of one header field.

    ``kind`` names the field (``protocol``, ``ip``, ``port``, ``direction``)
    and ``bound`` is the largest legal value; two sets are only comparable
    when both agree.
    """

    kind: str
    bound: int
    intervals: Tuple[Interval, ...] = ()

    def __post_init__(self):
        merged = merge_intervals(self.intervals)
        if merged and (merged[0][0] < 0 or merged[-1][1] > self.bound):
            raise ValueError(
                f"{self.kind} values {merged} outside [0, {self.bound}]")
        object.__setattr__(self, "intervals", merged)

    @classmethod
    def full(cls, kind: str, bound: int) -> "DimSet":
        return cls(kind, bound, ((0, bound),))

    @classmethod
    def single(cls, kind: str, bound: int, value: int) -> "DimSet":
        return cls(kind, bound, ((value, value),))

    @classmethod
    def from_values(cls, kind: str, bound: int, values: Iterable[int]) -> "DimSet":
        return cls(kind, bound, tuple((v, v) for v in values))

    def _check(self, other: "DimSet") -> None:
        if self.kind != other.kind or self.bound != other.bound:
            raise TypeError(
                f"cannot combine {self.kind}[0,{self.bound}] with "
                f"{other.kind}[0,{other.bound}]")

    def __contains__(self, value: int) -> bool:
        return any(lo <= value <= hi for lo, hi in self.intervals)

    def __iter__(self) -> Iterator[int]:
        for lo, hi in self.intervals:
            yield from range(lo, hi + 1)

    def __len__(self) -> int:
        return sum(hi - lo + 1 for lo, hi in self.intervals)

    @property
    def size(self) -> int:
        return len(self)

    def is_empty(self) -> bool:
        return not self.intervals

    def is_full(self) -> bool:
        return self.intervals == ((0, self.bound),)

    def intersect(self, other: "DimSet") -> "DimSet":
        self._check(other)
        out = []
        i = j = 0
        a, b = self.intervals, other.intervals
        while i < len(a) and j < len(b):
            lo = max(a[i][0], b[j][0])
            hi = min(a[i][1], b[j][1])
            if lo <= hi:
                out.append((lo, hi))
            if a[i][1] < b[j][1]:
                i += 1
            else:
                j += 1
        return DimSet(self.kind, self.bound, tuple(out))

    def subtract(self, other: "DimSet") -> "DimSet":
        self._check(other)
        out = []
        for lo, hi in self.intervals:
            cur = lo
            for blo, bhi in other.intervals:
                if bhi < cur or blo > hi:
                    continue
                if blo > cur:
                    out.append((cur, blo - 1))
                cur = max(cur, bhi + 1)
                if cur > hi:
                    break
            if cur <= hi:
                out.append((cur, hi))
        return DimSet(self.kind, self.bound, tuple(out))

    def complement(self) -> "DimSet":
        return DimSet.full(self.kind, self.bound).subtract(self)

    def union(self, other: "DimSet") -> "DimSet":
        self._check(other)
        return DimSet(self.kind, self.bound, self.intervals + other.intervals)

    def issubset(self, other: "DimSet") -> bool:
        return self.subtract(other).is_empty()


def field_relation(a: DimSet, b: DimSet) -> Relation:
    """Relation of ``a`` to ``b``; SUBSET and SUPERSET are proper."""
    a._check(b)
    common = a.intersect(b)
    if common.is_empty():
        return Relation.DISJOINT
    a_in_b = common.size == a.size
    b_in_a = common.size == b.size
    if a_in_b and b_in_a:
        return Relation.EQUAL
    if a_in_b:
        return Relation.SUBSET
    if b_in_a:
        return Relation.SUPERSET
    return Relation.PARTIAL


def intervals_of(values: Sequence[int]) -> Tuple[Interval, ...]:
    return merge_intervals((v, v) for v in values)
