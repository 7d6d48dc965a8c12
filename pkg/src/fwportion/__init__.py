"""Firewall policy analysis over a partition of packet-header space."""
from fwportion.model import (Action, Direction, Domain, PacketHeader, ParseError,
                             Policy, Rule, make_rule, parse_packet, parse_policy,
                             parse_policy_file, parse_rule_line, parse_xml_policy,
                             serialize_policy)

__version__ = "0.1.0"

__all__ = [
    "Action", "Direction", "Domain", "PacketHeader", "ParseError", "Policy", "Rule",
    "make_rule", "parse_packet", "parse_policy", "parse_policy_file",
    "parse_rule_line", "parse_xml_policy", "serialize_policy",
]
