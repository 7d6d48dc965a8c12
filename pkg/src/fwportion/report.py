"""Text and CSV renderings of the analysis results. Output is deterministic."""
from __future__ import annotations

import csv
import io
from typing import Iterable, List, Optional, Sequence

from fwportion.loganalyzer import Mismatch, TrafficStats
from fwportion.portions import PortionList, PortionStats
from fwportion.relations import AnomalyReport
from fwportion.update import UpdateReport

MAX_TEXT_BOXES = 3


def _csv(rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerows(rows)
    return buf.getvalue()


def _table(header: Sequence[str], rows: List[Sequence]) -> str:
    cells = [[str(c) for c in header]] + [[str(c) for c in r] for r in rows]
    widths = [max(len(row[i]) for row in cells) for i in range(len(header))]
    lines = ["  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip() for row in cells]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


def _ids(values) -> str:
    return " ".join(str(v) for v in sorted(values)) or "-"


def portion_rows(plist: PortionList, full: bool) -> List[list]:
    rows = []
    for k, p in enumerate(plist, 1):
        space = p.addsp
        if full or len(space) <= MAX_TEXT_BOXES:
            region = space.describe()
        else:
            shown = "; ".join(space.describe_box(i) for i in range(MAX_TEXT_BOXES))
            region = f"{shown}; (+{len(space) - MAX_TEXT_BOXES} boxes)"
        rows.append([k, p.action.value, p.head or "-", _ids(p.r_in), space.size,
                     len(space), region])
    return rows


PORTION_HEADER = ["portion", "action", "r_eff_head", "r_in", "packets", "boxes", "region"]


def stats_rows(stats: PortionStats) -> List[list]:
    rows = [["rule_count", stats.rule_count], ["portion_count", stats.portion_count],
            ["default_portion_count", stats.default_portion_count]]
    rows += [[f"portions_with_rule_{r}", c] for r, c in stats.portions_per_rule.items()]
    return rows


def render_partition(plist: PortionList, stats: PortionStats, as_csv: bool,
                     violations: Optional[Sequence[str]] = None) -> str:
    if as_csv:
        out = _csv([PORTION_HEADER] + portion_rows(plist, True))
        out += "\n" + _csv([["stat", "value"]] + stats_rows(stats))
        if violations is not None:
            out += "\n" + _csv([["violation"]] + [[v] for v in violations])
        return out
    out = _table(PORTION_HEADER, portion_rows(plist, False))
    out += "\n" + _table(["stat", "value"], stats_rows(stats))
    if violations is not None:
        out += "\nverification: " + ("pass" if not violations else "FAIL") + "\n"
        out += "".join(f"  {v}\n" for v in violations)
    return out


def render_anomalies(report: AnomalyReport, as_csv: bool) -> str:
    rows = [[r, kind, _ids(w)] for r, kind, w in report.rows()]
    rel = [[m, n, cls.value] for m, n, cls in report.relations]
    header = ["rule", "anomaly", "witnesses"]
    if as_csv:
        return _csv([header] + rows) + "\n" + _csv([["rule_a", "rule_b", "relation"]] + rel)
    out = _table(header, rows) if rows else "no anomalies\n"
    for m, n, fields in report.interrelated_pairs:
        detail = ", ".join(f"{k}={v.value}" for k, v in fields.items())
        out += f"rules {m} and {n} are interrelated ({detail})\n"
    out += "\n" + (_table(["rule_a", "rule_b", "relation"], rel) if rel
                   else "all rule pairs are disjoint\n")
    return out


def render_update(report: UpdateReport, as_csv: bool) -> str:
    delta = "UNKNOWN" if report.semantic_delta is None else report.semantic_delta
    summary = [["resulting_rule_count", report.resulting_rule_count],
               ["semantic_delta", delta]]
    dups = [[o, n] for o, n in report.removed_duplicates]
    rel = [[o, n, cls.value] for o, n, cls in report.relation_findings]
    if as_csv:
        return (_csv([["stat", "value"]] + summary)
                + "\n" + _csv([["removed_old_rule", "new_rule"]] + dups)
                + "\n" + _csv([["old_rule", "new_rule", "relation"]] + rel))
    out = _table(["stat", "value"], summary)
    out += "\n" + (_table(["removed_old_rule", "new_rule"], dups) if dups
                   else "no duplicates removed\n")
    out += "\n" + (_table(["old_rule", "new_rule", "relation"], rel) if rel
                   else "no overlapping rules\n")
    return out


def render_stats(stats: TrafficStats, as_csv: bool) -> str:
    rows = [["protocol_count", k, v] for k, v in stats.per_protocol_counts.items()]
    rows += [["protocol_percent", k, f"{v:.2f}"] for k, v in stats.per_protocol_percent.items()]
    rows += [["flag_count", k, v] for k, v in stats.flag_counts.items()]
    rows += [["verdict_count", k, v] for k, v in stats.verdict_counts.items()]
    if as_csv:
        return _csv([["section", "key", "value"]] + rows)
    return _table(["section", "key", "value"], rows) + f"\ntotal records: {stats.total}\n"


def render_mismatches(mismatches: Sequence[Mismatch], as_csv: bool) -> str:
    rows = [[m.position, m.record.verdict.value,
             m.expected.value if m.expected else "-", m.rule or "-", m.reason]
            for m in mismatches]
    header = ["record", "logged", "policy", "rule", "reason"]
    if as_csv:
        return _csv([header] + rows)
    body = _table(header, rows) if rows else ""
    return body + f"{len(mismatches)} mismatches\n"
