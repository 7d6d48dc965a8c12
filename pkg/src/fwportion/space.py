"""Exact set algebra over packet-header space.

A :class:`HeaderSpace` is a list of pairwise-disjoint hyperrectangles over the
six dimensions (protocol, src_ip, src_port, dst_ip, dst_port, direction).
Each box stores one inclusive interval per dimension; protocol tokens and
directions are mapped to integer codes by the :class:`~fwportion.model.Domain`.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from fwportion import _backend
from fwportion.dimset import DimSet, Relation, field_relation
from fwportion.model import (DIM_KINDS, DIRECTIONS, Domain, PacketHeader, Rule,
                             format_ip_set, format_port_set)

__all__ = [
    "Box", "DimSet", "DomainMismatch", "EnumerationCap", "HeaderSpace", "Relation",
    "canonicalize", "enumerate_packets", "field_relation", "space_equal",
    "space_intersect", "space_is_empty", "space_of_rule", "space_subset",
    "space_subtract", "space_union",
]

DEFAULT_CAP = 1 << 24


class DomainMismatch(ValueError):
    pass


class EnumerationCap(ValueError):
    pass


def _empty_boxes() -> np.ndarray:
    return np.empty((0, 6, 2), dtype=np.int64)


@dataclass(frozen=True)
class Box:
    """Readable view of one stored box."""

    protocol: DimSet
    src_ip: DimSet
    src_port: DimSet
    dst_ip: DimSet
    dst_port: DimSet
    direction: str  # INPUT, OUTPUT or BOTH


class HeaderSpace:
    __slots__ = ("domain", "_boxes", "_size")

    def __init__(self, domain: Domain, boxes=None):
        self.domain = domain
        arr = _empty_boxes() if boxes is None else np.asarray(boxes, dtype=np.int64)
        arr = arr.reshape(-1, 6, 2)
        arr.flags.writeable = False
        self._boxes = arr
        self._size = None

    @classmethod
    def empty(cls, domain: Domain) -> "HeaderSpace":
        return cls(domain)

    @classmethod
    def full(cls, domain: Domain) -> "HeaderSpace":
        return cls(domain, [[(0, b) for b in domain.bounds]])

    @classmethod
    def from_dims(cls, domain: Domain, dims: Sequence[DimSet]) -> "HeaderSpace":
        """Product of six value sets, split into single-interval boxes."""
        for ds, kind, bound in zip(dims, DIM_KINDS, domain.bounds):
            if ds.kind != kind or ds.bound != bound:
                raise DomainMismatch(f"{ds.kind}[0,{ds.bound}] does not fit {kind}")
        boxes = [list(combo) for combo in itertools.product(*(ds.intervals for ds in dims))]
        return cls(domain, boxes if boxes else None)

    @property
    def boxes(self) -> np.ndarray:
        return self._boxes

    def __len__(self) -> int:
        return self._boxes.shape[0]

    @property
    def size(self) -> int:
        """Number of packets; exact Python integer."""
        if self._size is None:
            total = 0
            for box in self._boxes.tolist():
                total += math.prod(hi - lo + 1 for lo, hi in box)
            self._size = total
        return self._size

    def is_empty(self) -> bool:
        return len(self) == 0

    def __contains__(self, packet) -> bool:
        coords = packet.coords(self.domain) if isinstance(packet, PacketHeader) else packet
        return _backend.kernels.locate(self._boxes, coords) >= 0

    def iter_boxes(self) -> Iterator[Box]:
        bounds = self.domain.bounds
        for box in self._boxes.tolist():
            dims = [DimSet(k, b, (tuple(iv),)) for k, b, iv in zip(DIM_KINDS, bounds, box)]
            lo, hi = box[5]
            direction = "BOTH" if lo != hi else DIRECTIONS[lo].value
            yield Box(*dims[:5], direction)

    def describe_box(self, i: int) -> str:
        d = self.domain
        box = self._boxes[i].tolist()
        plo, phi = box[0]
        proto = "ANY" if (plo, phi) == (0, d.bounds[0]) else "|".join(
            d.protocols[plo:phi + 1])
        direction = "BOTH" if box[5][0] != box[5][1] else DIRECTIONS[box[5][0]].value
        ds = [DimSet(k, b, (tuple(iv),)) for k, b, iv in zip(DIM_KINDS, d.bounds, box)]
        return (f"{proto} {direction} "
                f"{format_ip_set(ds[1], d)}:{format_port_set(ds[2])} -> "
                f"{format_ip_set(ds[3], d)}:{format_port_set(ds[4])}")

    def describe(self) -> str:
        return "; ".join(self.describe_box(i) for i in range(len(self))) or "(empty)"

    def __repr__(self) -> str:
        return f"HeaderSpace({len(self)} boxes, {self.size} packets)"


def _same_domain(a: HeaderSpace, b: HeaderSpace) -> None:
    if a.domain != b.domain:
        raise DomainMismatch(f"spaces over different domains: {a.domain} vs {b.domain}")


def canonicalize(a: HeaderSpace) -> HeaderSpace:
    """Drop empty boxes; box order is kept so outputs stay deterministic."""
    boxes = a.boxes
    keep = np.all(boxes[:, :, 0] <= boxes[:, :, 1], axis=1)
    if keep.all():
        return a
    return HeaderSpace(a.domain, boxes[keep])


def space_of_rule(rule: Rule) -> HeaderSpace:
    return HeaderSpace.from_dims(rule.domain, rule.dims)


def space_intersect(a: HeaderSpace, b: HeaderSpace) -> HeaderSpace:
    _same_domain(a, b)
    if a.is_empty() or b.is_empty():
        return HeaderSpace(a.domain)
    return HeaderSpace(a.domain, _backend.kernels.intersect(a.boxes, b.boxes))


def space_subtract(a: HeaderSpace, b: HeaderSpace) -> HeaderSpace:
    _same_domain(a, b)
    if a.is_empty() or b.is_empty():
        return a
    return HeaderSpace(a.domain, _backend.kernels.subtract(a.boxes, b.boxes))


def space_union(a: HeaderSpace, b: HeaderSpace) -> HeaderSpace:
    """``a`` followed by the parts of ``b`` not already in ``a``."""
    _same_domain(a, b)
    rest = space_subtract(b, a)
    return HeaderSpace(a.domain, np.concatenate([a.boxes, rest.boxes]))


def space_is_empty(a: HeaderSpace) -> bool:
    return a.is_empty()


def space_subset(a: HeaderSpace, b: HeaderSpace) -> bool:
    return space_subtract(a, b).is_empty()


def space_equal(a: HeaderSpace, b: HeaderSpace) -> bool:
    return space_subset(a, b) and space_subset(b, a)


def enumerate_packets(a: HeaderSpace, domain: Domain = None,
                      cap: int = DEFAULT_CAP) -> Iterator[PacketHeader]:
    """Yield every packet of ``a`` once, box by box in lexicographic order."""
    domain = domain or a.domain
    if domain != a.domain:
        raise DomainMismatch("space and domain differ")
    if a.size > cap:
        raise EnumerationCap(f"{a.size} packets exceed the enumeration cap {cap}")
    return _enumerate(a, domain)


def _enumerate(a: HeaderSpace, domain: Domain) -> Iterator[PacketHeader]:
    for box in a.boxes.tolist():
        for coords in itertools.product(*(range(lo, hi + 1) for lo, hi in box)):
            yield PacketHeader.from_coords(domain, coords)
