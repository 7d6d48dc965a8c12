"""Command-line entry point.

Exit status: 0 clean, 1 findings present (anomalies, violations, mismatches,
overlapping update rules), 2 input error.
"""
from __future__ import annotations

import argparse
import logging
import random
import sys
from typing import List, Optional

from fwportion import __version__
from fwportion.baseline import build_baseline, parse_framework, parse_topology, validate_topology
from fwportion.loganalyzer import parse_log, replay, synthesize_log, traffic_stats
from fwportion.model import (Direction, PacketHeader, ParseError, parse_packet, parse_policy,
                             serialize_policy)
from fwportion.portions import locate_portion, partition, portion_stats, verify_partition
from fwportion.relations import detect_anomalies
from fwportion.report import (render_anomalies, render_mismatches, render_partition,
                              render_stats, render_update)
from fwportion.update import update_policy

log = logging.getLogger("fwportion")

OK, FINDINGS, INPUT_ERROR = 0, 1, 2


class InputError(Exception):
    pass


def _read(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror}") from None


def _load_policy(path: str):
    try:
        return parse_policy(_read(path))
    except ParseError as exc:
        raise InputError(f"{path}: {exc}") from None


def _write(path: Optional[str], text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
        return
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)


def cmd_partition(args) -> int:
    policy = _load_policy(args.policy)
    plist = partition(policy)
    violations = verify_partition(plist).violations if args.verify else None
    sys.stdout.write(render_partition(plist, portion_stats(plist), args.csv, violations))
    return FINDINGS if violations else OK


def cmd_relations(args) -> int:
    report = detect_anomalies(_load_policy(args.policy))
    sys.stdout.write(render_anomalies(report, args.csv))
    return FINDINGS if report.has_findings else OK


def cmd_update(args) -> int:
    old, new = _load_policy(args.old), _load_policy(args.new)
    if old.domain != new.domain:
        raise InputError("old and new policies are over different domains")
    if old.default_action != new.default_action:
        raise InputError("old and new policies declare different default actions")
    updated, report = update_policy(old, new.rules)
    text = serialize_policy(updated, args.format)
    if args.output:
        _write(args.output, text)
    else:
        sys.stdout.write(text + "\n")
    sys.stdout.write(render_update(report, args.csv))
    return FINDINGS if report.relation_findings else OK


def cmd_match(args) -> int:
    policy = _load_policy(args.policy)
    try:
        packet = parse_packet(args.packet, policy.domain)
    except ParseError as exc:
        raise InputError(f"packet: {exc}") from None
    plist = partition(policy)
    k, portion = locate_portion(plist, packet)
    linear, _ = policy.first_match(packet)
    sys.stdout.write(f"action: {portion.action.value}\n"
                     f"rule: {portion.head or 'default'}\n"
                     f"portion: {k + 1}\n")
    if linear != portion.action:
        log.error("portion decision %s disagrees with first match %s",
                  portion.action.value, linear.value)
        return FINDINGS
    return OK


def _load_log(path: str):
    records, errors = parse_log(_read(path))
    for err in errors:
        print(f"fwportion: {path}: {err}", file=sys.stderr)
    if errors:
        raise InputError(f"{path}: {len(errors)} unparseable lines")
    return records


def cmd_logstats(args) -> int:
    sys.stdout.write(render_stats(traffic_stats(_load_log(args.log)), args.csv))
    return OK


def cmd_replay(args) -> int:
    records = _load_log(args.log)
    policy = _load_policy(args.policy)
    direction = Direction(args.direction) if args.direction else None
    mismatches = replay(records, policy, direction=direction)
    sys.stdout.write(render_mismatches(mismatches, args.csv))
    return FINDINGS if mismatches else OK


def cmd_synthlog(args) -> int:
    policy = _load_policy(args.policy)
    d = policy.domain
    rng = random.Random(args.seed)
    packets = []
    for _ in range(args.count):
        proto = rng.choice(d.protocols)
        sp, dp = (0, 0) if proto == "ICMP" else (rng.randint(0, d.port_max),
                                                 rng.randint(0, d.port_max))
        packets.append(PacketHeader(proto, rng.choice(list(Direction)),
                                    rng.randint(0, d.ip_max), sp, rng.randint(0, d.ip_max), dp))
    _write(args.output, "".join(r.format(d) + "\n" for r in synthesize_log(policy, packets)))
    return OK


def cmd_baseline(args) -> int:
    try:
        baseline = build_baseline(parse_framework(_read(args.config)))
    except ParseError as exc:
        raise InputError(f"{args.config}: {exc}") from None
    _write(args.output, serialize_policy(baseline.policy, args.format, baseline.comments()))
    return OK


def cmd_topology(args) -> int:
    try:
        violations = validate_topology(parse_topology(_read(args.config)))
    except ParseError as exc:
        raise InputError(f"{args.config}: {exc}") from None
    for v in violations:
        sys.stdout.write(f"{v}\n")
    sys.stdout.write(f"{len(violations)} violations\n")
    return FINDINGS if violations else OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fwportion", description="Firewall policy analysis over header-space portions.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("partition", help="split a policy into portions and report them")
    p.add_argument("policy")
    p.add_argument("--csv", action="store_true")
    p.add_argument("--verify", action="store_true", help="also run the structural checks")
    p.set_defaults(func=cmd_partition)

    p = sub.add_parser("relations", help="rule relations and anomalies")
    p.add_argument("policy")
    p.add_argument("--csv", action="store_true")
    p.set_defaults(func=cmd_relations)

    p = sub.add_parser("update", help="prepend new rules to an existing policy")
    p.add_argument("old")
    p.add_argument("new")
    p.add_argument("-o", "--output", help="write the merged policy here")
    p.add_argument("--format", choices=["csv", "xml"], default="csv")
    p.add_argument("--csv", action="store_true")
    p.set_defaults(func=cmd_update)

    p = sub.add_parser("match", help="decide one packet")
    p.add_argument("policy")
    p.add_argument("packet", help="'PROTO DIR SRC:SPT DST:DPT'")
    p.set_defaults(func=cmd_match)

    p = sub.add_parser("logstats", help="protocol, flag and verdict counts of a log")
    p.add_argument("log")
    p.add_argument("--csv", action="store_true")
    p.set_defaults(func=cmd_logstats)

    p = sub.add_parser("replay", help="check logged verdicts against a policy")
    p.add_argument("log")
    p.add_argument("policy")
    p.add_argument("--csv", action="store_true")
    p.add_argument("--direction", choices=["INPUT", "OUTPUT"],
                   help="override the direction inferred from IN=")
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("synthlog", help="log random packets with the policy's verdicts")
    p.add_argument("policy")
    p.add_argument("--count", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_synthlog)

    p = sub.add_parser("baseline", help="generate the baseline blocking policy")
    p.add_argument("config")
    p.add_argument("-o", "--output")
    p.add_argument("--format", choices=["csv", "xml"], default="csv")
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("topology", help="check DMZ isolation of a topology")
    p.add_argument("config")
    p.set_defaults(func=cmd_topology)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return INPUT_ERROR if exc.code else OK
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"fwportion: error: {exc}", file=sys.stderr)
        return INPUT_ERROR


if __name__ == "__main__":
    sys.exit(main())
