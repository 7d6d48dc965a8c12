"""Pairwise rule relations and policy anomalies (inactive, shadowed, redundant)."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Tuple

import numpy as np

from fwportion import _backend
from fwportion.dimset import Relation, field_relation
from fwportion.model import DIM_NAMES, Action, Policy, Rule
from fwportion.portions import PortionList, decision_grid, partition
from fwportion.space import DEFAULT_CAP, DomainMismatch, HeaderSpace


class RelationClass(str, Enum):
    COMPLETELY_MATCHED = "COMPLETELY_MATCHED"
    ALMOST_MATCH = "ALMOST_MATCH"
    INTERRELATED = "INTERRELATED"
    INCOMPLETELY_MATCH = "INCOMPLETELY_MATCH"
    COMPLETELY_DISJOINT = "COMPLETELY_DISJOINT"


FieldRelations = Dict[str, Relation]


def class_of(relations) -> RelationClass:
    """Class implied by a collection of per-field relations."""
    rels = set(relations)
    if Relation.DISJOINT in rels:
        return RelationClass.COMPLETELY_DISJOINT
    if rels == {Relation.EQUAL}:
        return RelationClass.COMPLETELY_MATCHED
    if Relation.PARTIAL in rels:
        return RelationClass.INCOMPLETELY_MATCH
    if Relation.SUBSET in rels and Relation.SUPERSET in rels:
        return RelationClass.INTERRELATED
    return RelationClass.ALMOST_MATCH


def classify_pair(m: Rule, n: Rule) -> Tuple[RelationClass, FieldRelations]:
    """Compare two rules field by field, direction included. Actions are ignored."""
    if m.domain != n.domain:
        raise DomainMismatch("rules over different domains")
    fields = {name: field_relation(a, b) for name, a, b in zip(DIM_NAMES, m.dims, n.dims)}
    return class_of(fields.values()), fields


@dataclass
class AnomalyReport:
    inactive: List[int] = field(default_factory=list)
    shadowed: List[int] = field(default_factory=list)
    redundant: List[int] = field(default_factory=list)
    interrelated_pairs: List[Tuple[int, int, FieldRelations]] = field(default_factory=list)
    relations: List[Tuple[int, int, RelationClass]] = field(default_factory=list)
    # rule index -> higher-priority rules that decide its packets
    witnesses: Dict[int, Tuple[int, ...]] = field(default_factory=dict)

    @property
    def has_findings(self) -> bool:
        return bool(self.inactive or self.shadowed or self.redundant)

    def rows(self) -> List[Tuple[int, str, Tuple[int, ...]]]:
        """``(rule, kind, witnesses)`` in rule order."""
        out = []
        for r in sorted(set(self.inactive) | set(self.redundant)):
            w = self.witnesses.get(r, ())
            if r in self.shadowed:
                out.append((r, "shadowed", w))
            elif r in self.inactive:
                out.append((r, "inactive", w))
            if r in self.redundant:
                out.append((r, "redundant", w))
        return out


def detect_anomalies(policy: Policy, plist: Optional[PortionList] = None,
                     cap: int = DEFAULT_CAP) -> AnomalyReport:
    plist = plist or partition(policy)
    report = AnomalyReport()
    heads = {p.head for p in plist}
    for rule in policy.rules:
        r = rule.index
        if r in heads:
            continue
        report.inactive.append(r)
        deciders = sorted({p.head for p in plist if r in p.r_in})
        report.witnesses[r] = tuple(deciders)
        # shadowed only when no part of it is decided the way it would decide
        if deciders and all(policy.rule(h).action != rule.action for h in deciders):
            report.shadowed.append(r)
    for rule in policy.rules:
        if semantic_equal(policy, policy.without(rule.index), cap=cap):
            report.redundant.append(rule.index)
    for m, n in itertools.combinations(policy.rules, 2):
        cls, fields = classify_pair(m, n)
        if cls is RelationClass.COMPLETELY_DISJOINT:
            continue
        report.relations.append((m.index, n.index, cls))
        if cls is RelationClass.INTERRELATED:
            report.interrelated_pairs.append((m.index, n.index, fields))
    return report


def action_regions(plist: PortionList) -> Dict[Action, np.ndarray]:
    """Boxes of all portions grouped by their resolved action."""
    groups: Dict[Action, List[np.ndarray]] = {}
    for p in plist:
        groups.setdefault(p.action, []).append(p.addsp.boxes)
    return {a: np.concatenate(bs) for a, bs in groups.items()}


def decision_delta(a: Policy, b: Policy, plist_a: Optional[PortionList] = None,
                   plist_b: Optional[PortionList] = None) -> int:
    """Number of packets whose action differs between two policies.

    Works on portion regions, so it never enumerates packets.
    """
    if a.domain != b.domain:
        raise DomainMismatch("policies over different domains")
    ra = action_regions(plist_a or partition(a))
    rb = action_regions(plist_b or partition(b))
    agree = 0
    for act, boxes in ra.items():
        if act in rb:
            agree += HeaderSpace(a.domain, _backend.kernels.intersect(boxes, rb[act])).size
    return a.domain.size - agree


def semantic_equal(a: Policy, b: Policy, cap: int = DEFAULT_CAP,
                   method: str = "auto") -> bool:
    """True iff every packet gets the same action; DENY and DROP are distinct.

    ``method`` is ``enumerate`` (dense grids, needs the domain under ``cap``),
    ``regions`` (portion-wise comparison) or ``auto``.
    """
    if a.domain != b.domain:
        raise DomainMismatch("policies over different domains")
    if method == "auto":
        method = "enumerate" if a.domain.size <= cap else "regions"
    if method == "enumerate":
        ga, _ = decision_grid(partition(a), cap)
        gb, _ = decision_grid(partition(b), cap)
        return bool(np.array_equal(ga, gb))
    if method == "regions":
        return decision_delta(a, b) == 0
    raise ValueError(f"unknown method {method!r}")
