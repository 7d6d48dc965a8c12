"""Parsing, field extraction, aggregate statistics and policy replay for firewall logs.

Lines look like::

    Date: May 25 Time:03:19:01 DENY portmap IN=eth0 SRC=172.168.0.4 DST = 96.17.182.18 PROTO = TCP SPT = 49634 DPT = 80 ACK

Spaces around ``=`` are optional. Bare tokens after the key/value pairs are
TCP flags; unknown bare tokens (``DF`` and the like) and unknown keys are
ignored.
"""
from __future__ import annotations

import datetime as dt
import re
from collections import Counter
from dataclasses import dataclass
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple

from fwportion.model import (Action, Direction, Domain, PacketHeader, ParseError,
                             Policy, format_ip, parse_ip_value)
from fwportion.portions import PortionList, partition, portion_decision

FLAGS = ("SYN", "FIN", "ACK", "RST", "PSH", "URG")
MONTHS = ("Jan", "Feb", "Mar", "Apr", "May", "Jun", "Jul", "Aug", "Sep", "Oct", "Nov", "Dec")
LOG_DOMAIN = Domain()

_HEAD = re.compile(
    r"^\s*Date:\s*(?P<mon>[A-Za-z]{3})\s+(?P<day>\d{1,2})\s+"
    r"Time:\s*(?P<time>\d{1,2}:\d{2}:\d{2})\s+(?P<verdict>\S+)\s*(?P<rest>.*)$")
_KV = re.compile(r"\b([A-Z][A-Z0-9_]*)\s*=\s*([^\s=]*)(?=\s|$)")


@dataclass(frozen=True)
class LogRecord:
    month: str
    day: int
    time: dt.time
    verdict: Action
    tag: str
    in_iface: str
    src_ip: int
    dst_ip: int
    protocol: str
    spt: int
    dpt: int
    flags: FrozenSet[str] = frozenset()

    @property
    def date(self) -> str:
        return f"{self.month} {self.day}"

    def format(self, domain: Domain = LOG_DOMAIN) -> str:
        """Canonical single-line form; parses back to an equal record."""
        parts = [f"Date: {self.date}", f"Time:{self.time.isoformat()}",
                 self.verdict.value]
        if self.tag:
            parts.append(self.tag)
        parts += [f"IN={self.in_iface}", f"SRC={format_ip(self.src_ip, domain)}",
                  f"DST={format_ip(self.dst_ip, domain)}", f"PROTO={self.protocol}",
                  f"SPT={self.spt}", f"DPT={self.dpt}"]
        parts += [f for f in FLAGS if f in self.flags]
        return " ".join(parts)


@dataclass(frozen=True)
class SignificantRecord:
    source: Tuple[int, int, str]
    target: Tuple[int, int]


def _port(key: str, text: str) -> int:
    if not text.isdigit() or int(text) > 0xFFFF:
        raise ParseError(f"bad {key} value {text!r}")
    return int(text)


def parse_log_line(text: str, domain: Domain = LOG_DOMAIN) -> LogRecord:
    m = _HEAD.match(text)
    if not m:
        raise ParseError(f"not a log line: {text.strip()[:60]!r}")
    mon = m["mon"].capitalize()
    if mon not in MONTHS:
        raise ParseError(f"unknown month {m['mon']!r}")
    day = int(m["day"])
    if not 1 <= day <= 31:
        raise ParseError(f"bad day {day}")
    try:
        time = dt.time.fromisoformat(m["time"].zfill(8))
    except ValueError:
        raise ParseError(f"bad time {m['time']!r}") from None
    try:
        verdict = Action(m["verdict"].upper())
    except ValueError:
        raise ParseError(f"unknown verdict {m['verdict']!r}") from None

    rest = m["rest"]
    fields: Dict[str, str] = {}
    spans = []
    for kv in _KV.finditer(rest):
        fields.setdefault(kv[1], kv[2])
        spans.append(kv.span())
    bare, last = [], 0
    for lo, hi in spans:
        bare += rest[last:lo].split()
        last = hi
    bare += rest[last:].split()
    tag = ""
    if bare and spans and rest.find(bare[0]) < spans[0][0]:
        tag = bare.pop(0)
    for key in ("SRC", "DST", "PROTO"):
        if not fields.get(key):
            raise ParseError(f"missing required key {key}")
    return LogRecord(
        month=mon, day=day, time=time, verdict=verdict, tag=tag,
        in_iface=fields.get("IN", ""),
        src_ip=parse_ip_value(fields["SRC"], domain),
        dst_ip=parse_ip_value(fields["DST"], domain),
        protocol=fields["PROTO"].upper(),
        spt=_port("SPT", fields.get("SPT") or "0"),
        dpt=_port("DPT", fields.get("DPT") or "0"),
        flags=frozenset(t.upper() for t in bare if t.upper() in FLAGS),
    )


def parse_log(text: str, domain: Domain = LOG_DOMAIN) -> Tuple[List[LogRecord], List[ParseError]]:
    """Parse every non-blank line; failures are collected with line numbers."""
    records, errors = [], []
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        try:
            records.append(parse_log_line(line, domain))
        except ParseError as exc:
            errors.append(ParseError(str(exc), lineno))
    return records, errors


def extract_significant(rec: LogRecord) -> SignificantRecord:
    return SignificantRecord((rec.src_ip, rec.spt, rec.protocol), (rec.dst_ip, rec.dpt))


@dataclass(frozen=True)
class TrafficStats:
    per_protocol_counts: Dict[str, int]
    per_protocol_percent: Dict[str, float]
    flag_counts: Dict[str, int]
    verdict_counts: Dict[str, int]

    @property
    def total(self) -> int:
        return sum(self.per_protocol_counts.values())


def traffic_stats(records: Iterable[LogRecord]) -> TrafficStats:
    protos, flags, verdicts = Counter(), Counter(), Counter()
    for rec in records:
        protos[rec.protocol] += 1
        verdicts[rec.verdict.value] += 1
        flags.update(rec.flags)
    total = sum(protos.values())
    percent = {p: 100.0 * c / total for p, c in sorted(protos.items())} if total else {}
    return TrafficStats(
        per_protocol_counts=dict(sorted(protos.items())),
        per_protocol_percent=percent,
        flag_counts={f: flags[f] for f in FLAGS if flags[f]},
        verdict_counts=dict(sorted(verdicts.items())),
    )


def record_to_packet(rec: LogRecord, domain: Domain,
                     direction: Optional[Direction] = None) -> PacketHeader:
    """Packet seen by the policy; INPUT when the record names an input interface."""
    if direction is None:
        direction = Direction.INPUT if rec.in_iface else Direction.OUTPUT
    spt, dpt = (0, 0) if rec.protocol == "ICMP" else (rec.spt, rec.dpt)
    packet = PacketHeader(rec.protocol, direction, rec.src_ip, spt, rec.dst_ip, dpt)
    if not packet.in_domain(domain):
        raise ParseError(f"record {rec.format()!r} lies outside the policy domain")
    return packet


@dataclass(frozen=True)
class Mismatch:
    position: int  # 1-based record position
    record: LogRecord
    expected: Optional[Action]
    rule: Optional[int]
    reason: str


def replay(records: Sequence[LogRecord], policy: Policy,
           plist: Optional[PortionList] = None,
           direction: Optional[Direction] = None) -> List[Mismatch]:
    """Records whose logged verdict disagrees with the policy decision.

    Only permit versus non-permit is compared, so a logged DENY agrees with a
    DROP decision. Out-of-domain records are reported, not raised.
    """
    plist = plist or partition(policy)
    out = []
    for pos, rec in enumerate(records, 1):
        try:
            packet = record_to_packet(rec, policy.domain, direction)
        except ParseError as exc:
            out.append(Mismatch(pos, rec, None, None, str(exc)))
            continue
        action, rule = portion_decision(plist, packet)
        if action.permits != rec.verdict.permits:
            who = f"rule {rule}" if rule else "default"
            out.append(Mismatch(pos, rec, action, rule,
                                f"logged {rec.verdict.value}, {who} gives {action.value}"))
    return out


def synthesize_log(policy: Policy, packets: Iterable[PacketHeader], tag: str = "fw",
                   iface: str = "eth0", start: dt.datetime = dt.datetime(2000, 1, 1)
                   ) -> List[LogRecord]:
    """Log lines for ``packets`` with verdicts from a linear first-match scan."""
    out = []
    for i, pkt in enumerate(packets):
        action, _ = policy.first_match(pkt)
        when = start + dt.timedelta(seconds=i)
        out.append(LogRecord(
            month=MONTHS[when.month - 1], day=when.day, time=when.time(), verdict=action,
            tag=tag, in_iface=iface if pkt.direction is Direction.INPUT else "",
            src_ip=pkt.src_ip, dst_ip=pkt.dst_ip, protocol=pkt.protocol,
            spt=pkt.src_port, dpt=pkt.dst_port,
            flags=frozenset({"ACK"}) if pkt.protocol == "TCP" else frozenset()))
    return out
