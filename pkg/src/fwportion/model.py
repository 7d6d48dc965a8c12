"""Rules, packets, policies and the header-space domain they live in.

Also holds the text formats: the comma separated policy layout, the XML
policy layout and the one-line packet notation used by the CLI.
"""
from __future__ import annotations

import ipaddress
import math
import re
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Iterable, Optional, Sequence, Tuple

from fwportion.dimset import DimSet

PROTO, SRC_IP, SRC_PORT, DST_IP, DST_PORT, DIRECTION = range(6)
DIM_NAMES = ("protocol", "src_ip", "src_port", "dst_ip", "dst_port", "direction")
DIM_KINDS = ("protocol", "ip", "port", "ip", "port", "direction")

ANY = "ANY"


class ParseError(ValueError):
    """Malformed policy, packet or log text. ``line`` is 1-based when known."""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class Action(str, Enum):
    ACCEPT = "ACCEPT"
    DENY = "DENY"
    DROP = "DROP"

    @property
    def permits(self) -> bool:
        return self is Action.ACCEPT

    @classmethod
    def parse(cls, text: str) -> "Action":
        try:
            return cls(text.strip().upper())
        except ValueError:
            raise ParseError(f"unknown action {text.strip()!r}") from None


class Direction(str, Enum):
    INPUT = "INPUT"
    OUTPUT = "OUTPUT"

    @property
    def code(self) -> int:
        return 0 if self is Direction.INPUT else 1

    @classmethod
    def parse(cls, text: str) -> "Direction":
        try:
            return cls(text.strip().upper())
        except ValueError:
            raise ParseError(f"unknown direction {text.strip()!r}") from None


DIRECTIONS = (Direction.INPUT, Direction.OUTPUT)


@dataclass(frozen=True)
class Domain:
    """Bit widths and protocol tokens spanning the packet-header space."""

    ip_bits: int = 32
    port_bits: int = 16
    protocols: Tuple[str, ...] = ("TCP", "UDP", "ICMP")

    def __post_init__(self):
        if not 1 <= self.ip_bits <= 32:
            raise ValueError(f"ip_bits must be in 1..32, got {self.ip_bits}")
        if not 1 <= self.port_bits <= 16:
            raise ValueError(f"port_bits must be in 1..16, got {self.port_bits}")
        protos = tuple(p.strip().upper() for p in self.protocols)
        if not protos or any(not p for p in protos):
            raise ValueError("protocols must be a non-empty list of tokens")
        if len(set(protos)) != len(protos):
            raise ValueError(f"duplicate protocol tokens in {protos}")
        if ANY in protos:
            raise ValueError("ANY is reserved and cannot be a protocol token")
        object.__setattr__(self, "protocols", protos)

    @property
    def ip_max(self) -> int:
        return (1 << self.ip_bits) - 1

    @property
    def port_max(self) -> int:
        return (1 << self.port_bits) - 1

    @property
    def bounds(self) -> Tuple[int, ...]:
        """Largest value of each of the six dimensions."""
        return (len(self.protocols) - 1, self.ip_max, self.port_max,
                self.ip_max, self.port_max, 1)

    @property
    def shape(self) -> Tuple[int, ...]:
        return tuple(b + 1 for b in self.bounds)

    @property
    def size(self) -> int:
        """Number of distinct packets, both directions included."""
        return math.prod(self.shape)

    def protocol_code(self, token: str) -> int:
        try:
            return self.protocols.index(token.upper())
        except ValueError:
            raise ParseError(
                f"protocol {token!r} not in domain {','.join(self.protocols)}"
            ) from None

    def full_dims(self) -> Tuple[DimSet, ...]:
        return tuple(DimSet.full(k, b) for k, b in zip(DIM_KINDS, self.bounds))

    def header(self) -> str:
        return (f"ip-bits={self.ip_bits} port-bits={self.port_bits} "
                f"protocols={','.join(self.protocols)}")

    @classmethod
    def from_header(cls, text: str) -> "Domain":
        kv = dict(item.split("=", 1) for item in text.split())
        try:
            return cls(int(kv.get("ip-bits", 32)), int(kv.get("port-bits", 16)),
                       tuple(kv.get("protocols", "TCP,UDP,ICMP").split(",")))
        except ValueError as exc:
            raise ParseError(f"bad domain header: {exc}") from None


DEFAULT_DOMAIN = Domain()


# -- values and patterns ----------------------------------------------------

def parse_ip_value(text: str, domain: Domain) -> int:
    text = text.strip()
    if domain.ip_bits == 32 and "." in text:
        try:
            return int(ipaddress.IPv4Address(text))
        except ValueError:
            raise ParseError(f"bad IP address {text!r}") from None
    if not text.isdigit():
        raise ParseError(f"bad IP value {text!r} for a {domain.ip_bits}-bit domain")
    value = int(text)
    if value > domain.ip_max:
        raise ParseError(f"IP value {value} outside {domain.ip_bits}-bit domain")
    return value


def format_ip(value: int, domain: Domain) -> str:
    if domain.ip_bits == 32:
        return str(ipaddress.IPv4Address(value))
    return str(value)


def parse_port_value(text: str, domain: Domain) -> int:
    text = text.strip()
    if not text.isdigit():
        raise ParseError(f"bad port {text!r}")
    value = int(text)
    if value > domain.port_max:
        raise ParseError(f"port {value} outside {domain.port_bits}-bit domain")
    return value


_WILDCARD = re.compile(r"^(\d{1,3}\.){0,3}\*(\.\*){0,3}$")


def parse_ip_pattern(text: str, domain: Domain) -> DimSet:
    """CIDR, exact value, ``lo-hi`` range, trailing octet wildcard or ANY."""
    text = text.strip()
    bound = domain.ip_max
    if text.upper() == ANY or text == "*":
        return DimSet.full("ip", bound)
    if "*" in text:
        if domain.ip_bits != 32:
            raise ParseError(f"octet wildcard {text!r} needs a 32-bit domain")
        if not _WILDCARD.match(text):
            raise ParseError(f"only trailing octet wildcards are supported: {text!r}")
        octets = [o for o in text.split(".") if o != "*"]
        if len(octets) == 0:
            return DimSet.full("ip", bound)
        text = ".".join(octets + ["0"] * (4 - len(octets))) + f"/{8 * len(octets)}"
    if "-" in text:
        lo_text, hi_text = text.split("-", 1)
        lo, hi = parse_ip_value(lo_text, domain), parse_ip_value(hi_text, domain)
        if lo > hi:
            raise ParseError(f"empty IP range {text!r}")
        return DimSet("ip", bound, ((lo, hi),))
    if "/" in text:
        addr, _, plen_text = text.partition("/")
        if not plen_text.isdigit() or int(plen_text) > domain.ip_bits:
            raise ParseError(f"bad prefix length in {text!r}")
        host_bits = domain.ip_bits - int(plen_text)
        lo = parse_ip_value(addr, domain) >> host_bits << host_bits
        return DimSet("ip", bound, ((lo, lo + (1 << host_bits) - 1),))
    return DimSet.single("ip", bound, parse_ip_value(text, domain))


def parse_port_pattern(text: str, domain: Domain) -> DimSet:
    text = text.strip()
    bound = domain.port_max
    if text.upper() == ANY or text == "*":
        return DimSet.full("port", bound)
    if "-" in text:
        lo_text, hi_text = text.split("-", 1)
        lo, hi = parse_port_value(lo_text, domain), parse_port_value(hi_text, domain)
        if lo > hi:
            raise ParseError(f"empty port range {text!r}")
        return DimSet("port", bound, ((lo, hi),))
    return DimSet.single("port", bound, parse_port_value(text, domain))


def format_ip_set(ds: DimSet, domain: Domain) -> str:
    if ds.is_full():
        return ANY
    (lo, hi), = ds.intervals
    if lo == hi:
        return format_ip(lo, domain)
    size = hi - lo + 1
    if size & (size - 1) == 0 and lo % size == 0:
        return f"{format_ip(lo, domain)}/{domain.ip_bits - size.bit_length() + 1}"
    return f"{format_ip(lo, domain)}-{format_ip(hi, domain)}"


def format_port_set(ds: DimSet) -> str:
    if ds.is_full():
        return ANY
    (lo, hi), = ds.intervals
    return str(lo) if lo == hi else f"{lo}-{hi}"


# -- rules, packets, policies ---------------------------------------------

@dataclass(frozen=True)
class PacketHeader:
    protocol: str
    direction: Direction
    src_ip: int
    src_port: int
    dst_ip: int
    dst_port: int

    def coords(self, domain: Domain) -> Tuple[int, ...]:
        return (domain.protocol_code(self.protocol), self.src_ip, self.src_port,
                self.dst_ip, self.dst_port, self.direction.code)

    @classmethod
    def from_coords(cls, domain: Domain, coords: Sequence[int]) -> "PacketHeader":
        p, sip, spt, dip, dpt, d = (int(c) for c in coords)
        return cls(domain.protocols[p], DIRECTIONS[d], sip, spt, dip, dpt)

    def in_domain(self, domain: Domain) -> bool:
        return (self.protocol in domain.protocols
                and 0 <= self.src_ip <= domain.ip_max
                and 0 <= self.dst_ip <= domain.ip_max
                and 0 <= self.src_port <= domain.port_max
                and 0 <= self.dst_port <= domain.port_max)

    def format(self, domain: Domain) -> str:
        return (f"{self.protocol} {self.direction.value} "
                f"{format_ip(self.src_ip, domain)}:{self.src_port} "
                f"{format_ip(self.dst_ip, domain)}:{self.dst_port}")


@dataclass(frozen=True)
class Rule:
    """One ordered policy entry. Lower ``index`` means higher priority."""

    index: int
    protocol: str
    direction: Direction
    src_ip: DimSet
    src_port: DimSet
    dst_ip: DimSet
    dst_port: DimSet
    action: Action
    domain: Domain = field(default=DEFAULT_DOMAIN, compare=False, repr=False)

    def __post_init__(self):
        for name in ("src_ip", "src_port", "dst_ip", "dst_port"):
            if len(getattr(self, name).intervals) != 1:
                raise ValueError(f"rule {name} must be a single interval")
        if self.protocol != ANY:
            self.domain.protocol_code(self.protocol)
        if self.protocol == "ICMP":
            for ds in (self.src_port, self.dst_port):
                if not (ds.is_full() or ds.intervals == ((0, 0),)):
                    raise ParseError("ICMP rules take ANY or 0 as ports")

    @property
    def dims(self) -> Tuple[DimSet, ...]:
        """The six per-dimension value sets in canonical dimension order."""
        bound = len(self.domain.protocols) - 1
        if self.protocol == ANY:
            proto = DimSet.full("protocol", bound)
        else:
            proto = DimSet.single("protocol", bound,
                                  self.domain.protocol_code(self.protocol))
        direction = DimSet.single("direction", 1, self.direction.code)
        return (proto, self.src_ip, self.src_port, self.dst_ip, self.dst_port,
                direction)

    @property
    def match_key(self) -> Tuple[DimSet, ...]:
        return self.dims

    def matches(self, packet: PacketHeader) -> bool:
        return all(v in ds for v, ds in zip(packet.coords(self.domain), self.dims))

    def size(self) -> int:
        return math.prod(len(ds) for ds in self.dims)

    def with_index(self, index: int) -> "Rule":
        return replace(self, index=index)

    def fields(self) -> Tuple[str, ...]:
        d = self.domain
        return (self.protocol, self.direction.value,
                format_ip_set(self.src_ip, d), format_port_set(self.src_port),
                format_ip_set(self.dst_ip, d), format_port_set(self.dst_port),
                self.action.value)

    def to_csv(self) -> str:
        return ", ".join(self.fields())


def make_rule(domain: Domain = DEFAULT_DOMAIN, *, index: int = 1,
              protocol: str = ANY, direction: str = "INPUT",
              src_ip: str = ANY, src_port: str = ANY, dst_ip: str = ANY,
              dst_port: str = ANY, action: str = "ACCEPT") -> Rule:
    """Build a rule from pattern strings, as they would appear in a file."""
    proto = protocol.strip().upper()
    if proto != ANY:
        domain.protocol_code(proto)
    return Rule(index, proto, Direction.parse(direction),
                parse_ip_pattern(src_ip, domain), parse_port_pattern(src_port, domain),
                parse_ip_pattern(dst_ip, domain), parse_port_pattern(dst_port, domain),
                Action.parse(action), domain)


@dataclass(frozen=True)
class Policy:
    rules: Tuple[Rule, ...] = ()
    default_action: Action = Action.DENY
    domain: Domain = DEFAULT_DOMAIN

    def __post_init__(self):
        object.__setattr__(self, "rules", tuple(self.rules))
        for i, rule in enumerate(self.rules, 1):
            if rule.index != i:
                raise ValueError(f"rule at position {i} has index {rule.index}")
            if rule.domain != self.domain:
                raise ValueError(f"rule {i} belongs to a different domain")

    @classmethod
    def from_rules(cls, rules: Iterable[Rule], default_action: Action = Action.DENY,
                   domain: Domain = DEFAULT_DOMAIN) -> "Policy":
        """Build a policy, renumbering ``rules`` 1..n in the given order."""
        return cls(tuple(r.with_index(i) for i, r in enumerate(rules, 1)),
                   default_action, domain)

    @property
    def n(self) -> int:
        return len(self.rules)

    def rule(self, index: int) -> Rule:
        return self.rules[index - 1]

    def without(self, index: int) -> "Policy":
        return Policy.from_rules((r for r in self.rules if r.index != index),
                                 self.default_action, self.domain)

    def first_match(self, packet: PacketHeader) -> Tuple[Action, Optional[int]]:
        """Linear scan; ``None`` as index means the default action applied."""
        for rule in self.rules:
            if rule.matches(packet):
                return rule.action, rule.index
        return self.default_action, None


# -- text formats -----------------------------------------------------------

def parse_rule_line(text: str, index: int, domain: Domain = DEFAULT_DOMAIN) -> Rule:
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != 7:
        raise ParseError(f"expected 7 comma-separated fields, got {len(parts)}")
    proto, direction, sip, spt, dip, dpt, action = parts
    return make_rule(domain, index=index, protocol=proto, direction=direction,
                     src_ip=sip, src_port=spt, dst_ip=dip, dst_port=dpt,
                     action=action)


_HEADER = re.compile(r"^#\s*(default|domain)\s*:\s*(.*)$", re.IGNORECASE)


def parse_policy_file(text: str, default_action: Optional[Action] = None,
                      domain: Optional[Domain] = None) -> Policy:
    """Parse the comma separated policy format.

    ``# default: ACTION`` and ``# domain: ip-bits=.. port-bits=.. protocols=..``
    header comments are honoured when the corresponding argument is None.
    """
    lines = text.splitlines()
    hdr_default, hdr_domain = None, None
    for lineno, line in enumerate(lines, 1):
        m = _HEADER.match(line.strip())
        if not m:
            continue
        try:
            if m.group(1).lower() == "default":
                hdr_default = Action.parse(m.group(2))
            else:
                hdr_domain = Domain.from_header(m.group(2))
        except ValueError as exc:
            raise ParseError(str(exc), lineno) from None
    default_action = default_action or hdr_default or Action.DENY
    domain = domain or hdr_domain or DEFAULT_DOMAIN

    rules = []
    for lineno, line in enumerate(lines, 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        try:
            rules.append(parse_rule_line(line, len(rules) + 1, domain))
        except ValueError as exc:
            raise ParseError(str(exc), lineno) from None
    return Policy(tuple(rules), default_action, domain)


_XML_RULE_ATTRS = ("proto", "dir", "src-ip", "src-port", "dst-ip", "dst-port", "action")


def xml_domain(root: ET.Element) -> Domain:
    try:
        protos = root.get("protocols")
        return Domain(int(root.get("ip-bits", 32)), int(root.get("port-bits", 16)),
                      tuple(protos.split(",")) if protos else DEFAULT_DOMAIN.protocols)
    except ValueError as exc:
        raise ParseError(f"bad domain attributes: {exc}") from None


def parse_xml_root(text: str) -> ET.Element:
    try:
        root = ET.fromstring(text)
    except ET.ParseError as exc:
        raise ParseError(f"malformed XML: {exc}") from None
    if root.tag != "policy":
        raise ParseError(f"root element must be <policy>, got <{root.tag}>")
    return root


def parse_xml_policy(text: str) -> Policy:
    """Parse the XML policy format; ``<framework>`` and ``<topology>`` are skipped."""
    root = parse_xml_root(text)
    domain = xml_domain(root)
    defaults = []
    if root.get("default") is not None:
        defaults.append(root.get("default"))
    rules = []
    for child in root:
        if child.tag == "rule":
            missing = [a for a in _XML_RULE_ATTRS if child.get(a) is None]
            if missing:
                raise ParseError(
                    f"<rule> #{len(rules) + 1} missing attributes {missing}")
            proto, direction, sip, spt, dip, dpt, action = (
                child.get(a) for a in _XML_RULE_ATTRS)
            try:
                rules.append(make_rule(domain, index=len(rules) + 1, protocol=proto,
                                       direction=direction, src_ip=sip, src_port=spt,
                                       dst_ip=dip, dst_port=dpt, action=action))
            except ValueError as exc:
                raise ParseError(f"<rule> #{len(rules) + 1}: {exc}") from None
        elif child.tag == "default":
            if child.get("action") is None:
                raise ParseError("<default> needs an action attribute")
            defaults.append(child.get("action"))
        elif child.tag not in ("framework", "topology"):
            raise ParseError(f"unexpected element <{child.tag}>")
    if len(defaults) > 1:
        raise ParseError("default action declared more than once")
    default = Action.parse(defaults[0]) if defaults else Action.DENY
    return Policy(tuple(rules), default, domain)


def serialize_policy(policy: Policy, fmt: str = "csv",
                     comments: Sequence[str] = ()) -> str:
    """Render ``policy`` as ``csv`` or ``xml``; ``comments`` go to the header."""
    fmt = fmt.lower()
    if fmt == "csv":
        out = [f"# default: {policy.default_action.value}",
               f"# domain: {policy.domain.header()}"]
        out += [f"# {c}" for c in comments]
        out += [r.to_csv() for r in policy.rules]
        return "\n".join(out) + "\n"
    if fmt == "xml":
        d = policy.domain
        root = ET.Element("policy", {
            "default": policy.default_action.value,
            "ip-bits": str(d.ip_bits), "port-bits": str(d.port_bits),
            "protocols": ",".join(d.protocols)})
        for c in comments:
            root.append(ET.Comment(f" {c} "))
        for r in policy.rules:
            ET.SubElement(root, "rule", dict(zip(_XML_RULE_ATTRS, r.fields())))
        ET.indent(root)
        return ET.tostring(root, encoding="unicode") + "\n"
    raise ValueError(f"unknown policy format {fmt!r}")


def parse_policy(text: str) -> Policy:
    """Parse either format, sniffing XML by its leading ``<``."""
    if text.lstrip().startswith("<"):
        return parse_xml_policy(text)
    return parse_policy_file(text)


def _split_endpoint(text: str) -> Tuple[str, Optional[str]]:
    if ":" in text:
        host, _, port = text.rpartition(":")
        return host, port
    return text, None


def parse_packet(text: str, domain: Domain = DEFAULT_DOMAIN) -> PacketHeader:
    """Parse ``PROTO DIR SRC:SPT DST:DPT``. ICMP ports are forced to 0."""
    parts = text.split()
    if len(parts) != 4:
        raise ParseError(f"expected 'PROTO DIR SRC:SPT DST:DPT', got {text!r}")
    proto = parts[0].upper()
    domain.protocol_code(proto)
    direction = Direction.parse(parts[1])
    (sip, spt), (dip, dpt) = _split_endpoint(parts[2]), _split_endpoint(parts[3])
    src_port = parse_port_value(spt, domain) if spt is not None else 0
    dst_port = parse_port_value(dpt, domain) if dpt is not None else 0
    if proto == "ICMP":
        src_port = dst_port = 0
    return PacketHeader(proto, direction, parse_ip_value(sip, domain), src_port,
                        parse_ip_value(dip, domain), dst_port)
