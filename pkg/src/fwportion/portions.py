"""Portion-wise partition of a policy's header space.

Each rule, in priority order, splits every portion it partially overlaps into
the part inside the rule and the part outside it. Portions fully inside a rule
record it in ``r_in``; portions disjoint from it record it in ``r_out``. When
all rules are processed, every packet of a portion matches exactly the same
rules, so the portion's action is that of its highest-priority rule.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, FrozenSet, List, Optional, Sequence, Tuple

import numpy as np

from fwportion import _backend
from fwportion.model import Action, Domain, PacketHeader, Policy
from fwportion.space import EnumerationCap, HeaderSpace, DEFAULT_CAP, space_of_rule


class PartitionError(RuntimeError):
    """A packet fell into zero or several portions."""


@dataclass(frozen=True)
class Portion:
    addsp: HeaderSpace
    r_in: FrozenSet[int]
    r_out: FrozenSet[int]
    r_eff: Tuple[int, ...]
    action: Action

    @property
    def head(self) -> Optional[int]:
        """Index of the deciding rule, or None when the default applies."""
        return self.r_eff[0] if self.r_eff else None


def resolve_action(policy: Policy, r_eff: Sequence[int]) -> Action:
    return policy.rule(r_eff[0]).action if r_eff else policy.default_action


@dataclass(frozen=True)
class PortionList:
    portions: Tuple[Portion, ...]
    policy: Policy
    _index: dict = field(default_factory=dict, compare=False, repr=False)

    def __len__(self) -> int:
        return len(self.portions)

    def __iter__(self):
        return iter(self.portions)

    def __getitem__(self, i) -> Portion:
        return self.portions[i]

    @property
    def domain(self) -> Domain:
        return self.policy.domain

    def stacked(self) -> Tuple[np.ndarray, np.ndarray]:
        """All portion boxes concatenated, with the owning portion position."""
        if "stack" not in self._index:
            boxes = [p.addsp.boxes for p in self.portions]
            owner = [np.full(len(b), i, dtype=np.int64) for i, b in enumerate(boxes)]
            if boxes:
                stack = (np.concatenate(boxes), np.concatenate(owner))
            else:
                stack = (np.empty((0, 6, 2), dtype=np.int64), np.empty(0, dtype=np.int64))
            self._index["stack"] = stack
        return self._index["stack"]


def add_portion(plist: PortionList, addsp: HeaderSpace, r_in, r_out, r_eff) -> PortionList:
    """Append a portion unless ``addsp`` is empty."""
    if addsp.is_empty():
        return plist
    r_eff = tuple(r_eff)
    portion = Portion(addsp, frozenset(r_in), frozenset(r_out), r_eff,
                      resolve_action(plist.policy, r_eff))
    return PortionList(plist.portions + (portion,), plist.policy)


class _Work:
    __slots__ = ("space", "r_in", "r_out", "r_eff")

    def __init__(self, space, r_in, r_out, r_eff):
        self.space = space
        self.r_in = r_in
        self.r_out = r_out
        self.r_eff = r_eff


def _classify(boxes: np.ndarray, owner: np.ndarray, count: int,
              rule_box: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Per portion: fully inside the rule box, and fully outside it."""
    lo, hi = rule_box[:, 0], rule_box[:, 1]
    inside = np.all((boxes[:, :, 0] >= lo) & (boxes[:, :, 1] <= hi), axis=1)
    outside = np.any((boxes[:, :, 0] > hi) | (boxes[:, :, 1] < lo), axis=1)
    not_in = np.bincount(owner, weights=~inside, minlength=count)
    not_out = np.bincount(owner, weights=~outside, minlength=count)
    return not_in == 0, not_out == 0


def partition(policy: Policy) -> PortionList:
    """Split the domain into portions, one rule at a time in priority order."""
    domain = policy.domain
    work: List[_Work] = [_Work(HeaderSpace.full(domain), frozenset(), frozenset(), ())]
    kern = _backend.kernels
    for rule in policy.rules:
        r = rule.index
        rspace = space_of_rule(rule)
        boxes = np.concatenate([w.space.boxes for w in work])
        owner = np.repeat(np.arange(len(work)), [len(w.space) for w in work])
        kept: List[_Work] = []
        split: List[_Work] = []
        if len(rspace) == 1:
            inside, outside = _classify(boxes, owner, len(work), rspace.boxes[0])
        else:
            inside = outside = np.zeros(len(work), dtype=bool)
        for k, g in enumerate(work):
            if outside[k]:
                g.r_out = g.r_out | {r}
                kept.append(g)
                continue
            if inside[k]:
                g.r_in = g.r_in | {r}
                g.r_eff = g.r_eff + (r,)
                kept.append(g)
                continue
            inc = HeaderSpace(domain, kern.intersect(g.space.boxes, rspace.boxes))
            if inc.is_empty():
                g.r_out = g.r_out | {r}
                kept.append(g)
            elif inc.size == g.space.size:
                g.r_in = g.r_in | {r}
                g.r_eff = g.r_eff + (r,)
                kept.append(g)
            else:
                exc = HeaderSpace(domain, kern.subtract(g.space.boxes, rspace.boxes))
                for part in (_Work(inc, g.r_in | {r}, g.r_out, g.r_eff + (r,)),
                             _Work(exc, g.r_in, g.r_out | {r}, g.r_eff)):
                    if not part.space.is_empty():
                        split.append(part)
        work = kept + split
    portions = tuple(Portion(w.space, w.r_in, w.r_out, w.r_eff,
                             resolve_action(policy, w.r_eff)) for w in work)
    return PortionList(portions, policy)


def locate_portion(plist: PortionList, packet: PacketHeader) -> Tuple[int, Portion]:
    """Position and portion holding ``packet``."""
    boxes, owner = plist.stacked()
    pt = np.asarray(packet.coords(plist.domain), dtype=np.int64)
    hit = np.all((boxes[:, :, 0] <= pt) & (pt <= boxes[:, :, 1]), axis=1)
    owners = np.unique(owner[hit])
    if len(owners) != 1:
        raise PartitionError(
            f"packet {packet} lies in {len(owners)} portions, expected exactly 1")
    k = int(owners[0])
    return k, plist.portions[k]


def portion_decision(plist: PortionList, packet: PacketHeader) -> Tuple[Action, Optional[int]]:
    _, portion = locate_portion(plist, packet)
    return portion.action, portion.head


ACTION_CODES = {Action.ACCEPT: 0, Action.DENY: 1, Action.DROP: 2}


def decision_grid(plist: PortionList, cap: int = DEFAULT_CAP) -> Tuple[np.ndarray, np.ndarray]:
    """Paint every portion into dense grids over the whole domain.

    Returns ``(actions, winners)`` shaped like ``domain.shape``: the action
    code (see ``ACTION_CODES``) and the deciding rule index (0 for default).
    Cells no portion reaches hold -1.
    """
    domain = plist.domain
    if domain.size > cap:
        raise EnumerationCap(f"domain of {domain.size} packets exceeds cap {cap}")
    actions = np.full(domain.shape, -1, dtype=np.int8)
    winners = np.full(domain.shape, -1, dtype=np.int32)
    for p in plist.portions:
        code = ACTION_CODES[p.action]
        head = p.head or 0
        for box in p.addsp.boxes.tolist():
            sl = tuple(slice(lo, hi + 1) for lo, hi in box)
            actions[sl] = code
            winners[sl] = head
    return actions, winners


@dataclass
class PartitionReport:
    violations: List[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok


def verify_partition(plist: PortionList, check_rules: bool = True,
                     max_overlaps: int = 20) -> PartitionReport:
    """Check structure without enumerating packets.

    Covers non-empty portions, pairwise disjointness, full coverage of the
    domain, ``r_in``/``r_out`` complementarity, ``r_eff`` ordering, resolved
    actions and the ``2**n`` bound. With ``check_rules`` each portion is also
    checked to lie inside every rule of ``r_in`` and outside every rule of
    ``r_out``.
    """
    report = PartitionReport()
    bad = report.violations
    policy = plist.policy
    n = policy.n
    everything = frozenset(range(1, n + 1))
    for k, p in enumerate(plist.portions, 1):
        if p.addsp.is_empty():
            bad.append(f"portion {k}: empty space")
        if p.r_in & p.r_out:
            bad.append(f"portion {k}: rules {sorted(p.r_in & p.r_out)} in both r_in and r_out")
        if p.r_in | p.r_out != everything:
            missing = sorted(everything - (p.r_in | p.r_out))
            extra = sorted((p.r_in | p.r_out) - everything)
            bad.append(f"portion {k}: r_in/r_out miss {missing} or add unknown {extra}")
        if list(p.r_eff) != sorted(p.r_in):
            bad.append(f"portion {k}: r_eff {list(p.r_eff)} is not r_in in priority order")
        if p.r_eff and not 1 <= p.r_eff[0] <= n:
            bad.append(f"portion {k}: r_eff names unknown rule {p.r_eff[0]}")
        elif p.action != resolve_action(policy, p.r_eff):
            bad.append(f"portion {k}: action {p.action.value} does not follow r_eff")
    if len(plist) > 2 ** n:
        bad.append(f"{len(plist)} portions exceed the 2^{n} bound")

    boxes, owner = plist.stacked()
    pairs = _backend.kernels.overlapping_pairs(boxes, max_overlaps)
    for i, j in pairs:
        a, b = int(owner[i]) + 1, int(owner[j]) + 1
        where = f"portion {a} overlaps itself" if a == b else f"portions {a} and {b} overlap"
        bad.append(where)
    total = sum(p.addsp.size for p in plist.portions)
    if not pairs and total != policy.domain.size:
        bad.append(f"portions cover {total} of {policy.domain.size} packets")
    elif pairs:
        rest = HeaderSpace.full(policy.domain)
        rest = HeaderSpace(policy.domain, _backend.kernels.subtract(rest.boxes, boxes))
        if not rest.is_empty():
            bad.append(f"portions leave {rest.size} packets uncovered")

    if check_rules and len(boxes):
        for rule in policy.rules:
            rspace = space_of_rule(rule)
            if len(rspace) != 1:
                continue
            inside, outside = _classify(boxes, owner, len(plist), rspace.boxes[0])
            for k, p in enumerate(plist.portions):
                if rule.index in p.r_in and not inside[k]:
                    bad.append(f"portion {k + 1}: not inside r_in rule {rule.index}")
                if rule.index in p.r_out and not outside[k]:
                    bad.append(f"portion {k + 1}: not outside r_out rule {rule.index}")
    return report


@dataclass(frozen=True)
class PortionStats:
    rule_count: int
    portion_count: int
    portions_per_rule: Dict[int, int]
    default_portion_count: int


def portion_stats(plist: PortionList) -> PortionStats:
    per_rule = {r.index: 0 for r in plist.policy.rules}
    for p in plist.portions:
        for r in p.r_in:
            per_rule[r] = per_rule.get(r, 0) + 1
    return PortionStats(
        rule_count=plist.policy.n,
        portion_count=len(plist),
        portions_per_rule=dict(sorted(per_rule.items())),
        default_portion_count=sum(1 for p in plist.portions if not p.r_eff),
    )
