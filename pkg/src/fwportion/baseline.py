"""Baseline blocking policy for a DMZ framework, plus DMZ topology checks."""
from __future__ import annotations

import ipaddress
import itertools
from collections import deque
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, List, Sequence, Tuple

from fwportion.model import (Action, Domain, ParseError, Policy, Rule, make_rule,
                             parse_xml_root, xml_domain)

PRIVATE_RANGES = ("10.0.0.0/8", "172.16.0.0/12", "192.168.0.0/16")
LOOPBACK = "127.0.0.0/8"
UNSPECIFIED = "0.0.0.0"
LIMITED_BROADCAST = "255.255.255.255"
SNMP_PORTS = "161-162"
IPV4 = ipaddress.IPv4Network


@dataclass(frozen=True)
class DmzServer:
    addr: ipaddress.IPv4Address
    port: int
    protocol: str = "TCP"
    name: str = ""


@dataclass(frozen=True)
class FrameworkConfig:
    internal_ranges: Tuple[IPV4, ...] = ()
    firewall_addrs: Tuple[ipaddress.IPv4Address, ...] = ()
    dmz_servers: Tuple[DmzServer, ...] = ()
    management_hosts: Tuple[IPV4, ...] = ()
    default_action: Action = Action.DENY
    domain: Domain = Domain()

    def __post_init__(self):
        if self.domain.ip_bits != 32:
            raise ValueError("the baseline needs a 32-bit IP domain")
        for proto in ("TCP", "UDP", "ICMP"):
            if proto not in self.domain.protocols:
                raise ValueError(f"the baseline needs protocol {proto} in the domain")
        for a, b in itertools.combinations(self.internal_ranges, 2):
            if a.overlaps(b):
                raise ValueError(f"internal ranges {a} and {b} overlap")
        for s in self.dmz_servers:
            for net in self.internal_ranges:
                if s.addr in net:
                    raise ValueError(f"DMZ server {s.addr} sits inside internal range {net}")
            if s.protocol not in self.domain.protocols:
                raise ValueError(f"DMZ server protocol {s.protocol} not in domain")


def _complement(nets: Sequence[IPV4]) -> List[str]:
    """Inclusive address ranges covering everything outside ``nets``."""
    if not nets:
        return ["ANY"]
    spans = sorted((int(n.network_address), int(n.broadcast_address)) for n in nets)
    out, cur = [], 0
    for lo, hi in spans:
        if lo > cur:
            out.append((cur, lo - 1))
        cur = max(cur, hi + 1)
    if cur <= 0xFFFFFFFF:
        out.append((cur, 0xFFFFFFFF))
    return [f"{ipaddress.IPv4Address(lo)}-{ipaddress.IPv4Address(hi)}" for lo, hi in out]


@dataclass
class Baseline:
    policy: Policy
    # (blocking-list item, generated rule indices)
    mapping: List[Tuple[str, Tuple[int, ...]]]
    notes: List[str] = field(default_factory=list)

    def comments(self) -> List[str]:
        lines = []
        for item, idx in self.mapping:
            lines.append(f"{item}: rules {', '.join(map(str, idx)) or 'none'}")
        return lines + [f"note: {n}" for n in self.notes]


def build_baseline(config: FrameworkConfig) -> Baseline:
    d = config.domain
    rules: List[Rule] = []
    mapping: List[Tuple[str, Tuple[int, ...]]] = []

    def emit(item: str, specs: Sequence[dict]) -> None:
        start = len(rules)
        for spec in specs:
            rules.append(make_rule(d, index=len(rules) + 1, **spec))
        mapping.append((item, tuple(range(start + 1, len(rules) + 1))))

    both = ("INPUT", "OUTPUT")
    outside_mgmt = _complement(config.management_hosts)

    emit("dmz services", [
        dict(protocol=s.protocol, direction="INPUT", dst_ip=str(s.addr),
             dst_port=str(s.port), action="ACCEPT")
        for s in config.dmz_servers])
    emit("inbound ICMP", [dict(protocol="ICMP", direction="INPUT", action="DENY")])
    emit("inbound from private ranges", [
        dict(direction="INPUT", src_ip=net, action="DENY") for net in PRIVATE_RANGES])
    emit("inbound to firewall from invalid source", [
        dict(direction="INPUT", src_ip=src, dst_ip=str(fw), action="DENY")
        for fw in config.firewall_addrs for src in outside_mgmt])
    emit("inbound claiming an internal source", [
        dict(direction="INPUT", src_ip=str(net), action="DENY")
        for net in config.internal_ranges])
    emit("inbound SNMP from invalid source", [
        dict(protocol="UDP", direction="INPUT", src_ip=src, dst_port=SNMP_PORTS,
             action="DENY") for src in outside_mgmt])
    broadcasts = [LIMITED_BROADCAST] + [
        str(net.broadcast_address) for net in config.internal_ranges
        if net.prefixlen < 31]
    emit("broadcast to internal addresses", [
        dict(direction=dr, dst_ip=addr, action="DENY")
        for dr in both for addr in broadcasts])
    emit("loopback source or target", [
        dict(direction=dr, **{end: LOOPBACK}, action="DENY")
        for dr in both for end in ("src_ip", "dst_ip")])
    mapping.append(("inbound source-routed packets", ()))
    emit("unspecified address 0.0.0.0", [
        dict(direction=dr, **{end: UNSPECIFIED}, action="DENY")
        for dr in both for end in ("src_ip", "dst_ip")])
    notes = ["source-routed packets carry IP options the five-tuple model cannot "
             "express; block them with the firewall's IP options filter"]
    return Baseline(Policy(tuple(rules), config.default_action, d), mapping, notes)


def generate_baseline(config: FrameworkConfig) -> Policy:
    return build_baseline(config).policy


def parse_framework(text: str) -> FrameworkConfig:
    """Read ``<framework>`` from an XML policy document."""
    root = parse_xml_root(text)
    frames = root.findall("framework")
    if len(frames) != 1:
        raise ParseError(f"expected one <framework> section, found {len(frames)}")
    fw = frames[0]
    try:
        return FrameworkConfig(
            internal_ranges=tuple(IPV4(e.get("prefix", ""), strict=False)
                                  for e in fw.findall("internal")),
            firewall_addrs=tuple(ipaddress.IPv4Address(e.get("addr", ""))
                                 for e in fw.findall("firewall")),
            dmz_servers=tuple(
                DmzServer(ipaddress.IPv4Address(e.get("addr", "")), int(e.get("port", "")),
                          e.get("proto", "TCP").upper(), e.get("name", ""))
                for e in fw.findall("server")),
            management_hosts=tuple(IPV4(e.get("prefix", ""), strict=False)
                                   for e in fw.findall("management")),
            default_action=Action.parse(root.get("default", "DENY")),
            domain=xml_domain(root),
        )
    except ValueError as exc:
        raise ParseError(f"bad <framework>: {exc}") from None


# -- topology ----------------------------------------------------------------

ZONES = ("EXTERNAL", "DMZ", "INTERNAL", "FIREWALL")
_FORBIDDEN = (("EXTERNAL", "INTERNAL"), ("DMZ", "INTERNAL"), ("EXTERNAL", "DMZ"))


@dataclass(frozen=True)
class Topology:
    zones: Dict[str, str]  # node name -> zone kind
    links: FrozenSet[FrozenSet[str]]

    def __post_init__(self):
        for node, zone in self.zones.items():
            if zone not in ZONES:
                raise ValueError(f"node {node}: unknown zone {zone!r}")
        for link in self.links:
            if len(link) != 2:
                raise ValueError(f"link {sorted(link)} must join two distinct nodes")
            for node in link:
                if node not in self.zones:
                    raise ValueError(f"link references undeclared node {node!r}")

    @classmethod
    def build(cls, zones: Dict[str, str], links: Sequence[Tuple[str, str]]) -> "Topology":
        return cls(dict(zones), frozenset(frozenset(link) for link in links))


@dataclass(frozen=True)
class Violation:
    kind: str  # e.g. "DMZ-INTERNAL"
    a: str
    b: str
    direct: bool

    def __str__(self) -> str:
        how = "linked directly" if self.direct else "connected without a firewall"
        return f"{self.kind}: {self.a} and {self.b} are {how}"


def validate_topology(t: Topology) -> List[Violation]:
    """Zone pairs that reach each other without passing a FIREWALL node."""
    adj: Dict[str, List[str]] = {n: [] for n in t.zones}
    for link in t.links:
        a, b = sorted(link)
        if "FIREWALL" not in (t.zones[a], t.zones[b]):
            adj[a].append(b)
            adj[b].append(a)
    component: Dict[str, int] = {}
    for start in sorted(adj):
        if start in component or t.zones[start] == "FIREWALL":
            continue
        component[start] = len(component)
        queue = deque([start])
        while queue:
            u = queue.popleft()
            for v in adj[u]:
                if v not in component:
                    component[v] = component[start]
                    queue.append(v)
    direct = {frozenset(link) for link in t.links}
    out = []
    for a, b in itertools.combinations(sorted(component), 2):
        za, zb = t.zones[a], t.zones[b]
        for x, y in _FORBIDDEN:
            if {za, zb} == {x, y} and component[a] == component[b]:
                first, second = (a, b) if za == x else (b, a)
                out.append(Violation(f"{x}-{y}", first, second, frozenset((a, b)) in direct))
    return out


def parse_topology(text: str) -> Topology:
    root = parse_xml_root(text)
    tops = root.findall("topology")
    if len(tops) != 1:
        raise ParseError(f"expected one <topology> section, found {len(tops)}")
    zones, links = {}, []
    for e in tops[0]:
        if e.tag == "node":
            name, zone = e.get("name"), (e.get("zone") or "").upper()
            if not name:
                raise ParseError("<node> needs a name")
            if name in zones:
                raise ParseError(f"node {name!r} declared twice")
            zones[name] = zone
        elif e.tag == "link":
            links.append((e.get("a"), e.get("b")))
        else:
            raise ParseError(f"unexpected element <{e.tag}> in <topology>")
    try:
        return Topology.build(zones, links)
    except ValueError as exc:
        raise ParseError(str(exc)) from None
