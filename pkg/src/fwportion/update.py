"""Policy update: new rules go in front, exact duplicates of them leave the old policy."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

from fwportion.model import Policy, Rule
from fwportion.relations import FieldRelations, RelationClass, classify_pair, decision_delta
from fwportion.space import DomainMismatch


@dataclass
class UpdateReport:
    removed_duplicates: List[Tuple[int, int]] = field(default_factory=list)
    relation_findings: List[Tuple[int, int, RelationClass]] = field(default_factory=list)
    resulting_rule_count: int = 0
    # packets whose action changed; None when not computed
    semantic_delta: Optional[int] = None


def _check(old: Policy, new_rules: Sequence[Rule]) -> None:
    for rule in new_rules:
        if rule.domain != old.domain:
            raise DomainMismatch(f"new rule {rule.index} is over a different domain")


def relation_report(old: Policy, new_rules: Sequence[Rule]
                    ) -> List[Tuple[int, int, RelationClass, FieldRelations]]:
    """Every (old, new) pair that is not completely disjoint."""
    _check(old, new_rules)
    out = []
    for o in old.rules:
        for n in new_rules:
            cls, fields = classify_pair(o, n)
            if cls is not RelationClass.COMPLETELY_DISJOINT:
                out.append((o.index, n.index, cls, fields))
    return out


def update_policy(old: Policy, new_rules: Sequence[Rule],
                  delta: bool = True) -> Tuple[Policy, UpdateReport]:
    """Prepend ``new_rules`` and drop old rules whose match fields equal a new rule's.

    New rules are identified by their own ``index`` in the report. The
    decision delta is counted over portion regions, so it is exact on any
    domain size; pass ``delta=False`` to skip it.
    """
    _check(old, new_rules)
    report = UpdateReport()
    kept = []
    for o in old.rules:
        dup = next((n for n in new_rules if n.match_key == o.match_key), None)
        if dup is None:
            kept.append(o)
        else:
            report.removed_duplicates.append((o.index, dup.index))
    report.relation_findings = [(o, n, cls) for o, n, cls, _ in relation_report(old, new_rules)]
    updated = Policy.from_rules(list(new_rules) + kept, old.default_action, old.domain)
    report.resulting_rule_count = updated.n
    if delta:
        report.semantic_delta = decision_delta(old, updated)
    return updated, report
