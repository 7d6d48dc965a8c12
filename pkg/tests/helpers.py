"""Random generators and brute-force oracles shared by the test modules.

The oracles here never touch the box kernels or the portion engine: rule
membership is evaluated value by value and combined with numpy broadcasting.
"""
import random

import numpy as np

from fwportion.model import ANY, Action, Domain, Policy, make_rule

ACTIONS = ("ACCEPT", "DENY", "DROP")
ACTION_CODE = {"ACCEPT": 0, "DENY": 1, "DROP": 2}


def small_domain(ip_bits=4, port_bits=4, protocols=("TCP", "UDP")):
    return Domain(ip_bits, port_bits, protocols)


def rand_ip(rng, d):
    kind = rng.random()
    if kind < 0.3:
        return ANY
    if kind < 0.55:
        plen = rng.randint(0, d.ip_bits)
        return f"{rng.randint(0, d.ip_max)}/{plen}"
    if kind < 0.8:
        lo, hi = sorted((rng.randint(0, d.ip_max), rng.randint(0, d.ip_max)))
        return f"{lo}-{hi}"
    return str(rng.randint(0, d.ip_max))


def rand_port(rng, d):
    kind = rng.random()
    if kind < 0.35:
        return ANY
    if kind < 0.75:
        lo, hi = sorted((rng.randint(0, d.port_max), rng.randint(0, d.port_max)))
        return f"{lo}-{hi}"
    return str(rng.randint(0, d.port_max))


def rand_rule(rng, d, index=1, actions=ACTIONS):
    proto = rng.choice(list(d.protocols) + [ANY])
    if proto == "ICMP":
        sp, dp = rng.choice([ANY, "0"]), rng.choice([ANY, "0"])
    else:
        sp, dp = rand_port(rng, d), rand_port(rng, d)
    return make_rule(
        d, index=index, protocol=proto,
        direction=rng.choice(["INPUT", "OUTPUT"]),
        src_ip=rand_ip(rng, d), src_port=sp,
        dst_ip=rand_ip(rng, d), dst_port=dp,
        action=rng.choice(actions))


def rand_policy(rng, d, max_rules=8, min_rules=0, actions=ACTIONS):
    n = rng.randint(min_rules, max_rules)
    rules = [rand_rule(rng, d, i + 1, actions) for i in range(n)]
    return Policy(tuple(rules), Action(rng.choice(actions)), d)


# -- oracles ------------------------------------------------------------------

def rule_mask(rule):
    """Dense boolean membership of ``rule`` over its domain, value by value."""
    d = rule.domain
    proto = np.array([rule.protocol == ANY or rule.protocol == p for p in d.protocols])
    direction = np.array([rule.direction.value == x for x in ("INPUT", "OUTPUT")])
    axes = [proto,
            np.array([v in rule.src_ip for v in range(d.ip_max + 1)]),
            np.array([v in rule.src_port for v in range(d.port_max + 1)]),
            np.array([v in rule.dst_ip for v in range(d.ip_max + 1)]),
            np.array([v in rule.dst_port for v in range(d.port_max + 1)]),
            direction]
    mask = np.ones(d.shape, dtype=bool)
    for axis, vec in enumerate(axes):
        shape = [1] * 6
        shape[axis] = len(vec)
        mask &= vec.reshape(shape)
    return mask


def first_match_grid(policy):
    """(action codes, winning index or 0) for every packet, by linear priority."""
    d = policy.domain
    winner = np.zeros(d.shape, dtype=np.int32)
    for rule in reversed(policy.rules):
        winner[rule_mask(rule)] = rule.index
    codes = np.array([ACTION_CODE[policy.default_action.value]]
                     + [ACTION_CODE[r.action.value] for r in policy.rules], dtype=np.int8)
    return codes[winner], winner


def any_match_grid(rules, domain):
    mask = np.zeros(domain.shape, dtype=bool)
    for rule in rules:
        mask |= rule_mask(rule)
    return mask


def paint(boxes, domain):
    """How many boxes cover each packet (plain slicing, no kernels)."""
    grid = np.zeros(domain.shape, dtype=np.int32)
    for box in np.asarray(boxes).reshape(-1, 6, 2).tolist():
        grid[tuple(slice(lo, hi + 1) for lo, hi in box)] += 1
    return grid


def rand_boxes(rng, domain, count):
    out = []
    for _ in range(count):
        box = []
        for b in domain.bounds:
            lo, hi = sorted((rng.randint(0, b), rng.randint(0, b)))
            box.append((lo, hi))
        out.append(box)
    return np.array(out, dtype=np.int64).reshape(-1, 6, 2)


def rand_space_boxes(rng, domain, count):
    """Random *disjoint* boxes: later boxes are cut by earlier ones."""
    from fwportion._pykernels import subtract

    acc = np.empty((0, 6, 2), dtype=np.int64)
    for box in rand_boxes(rng, domain, count):
        acc = np.concatenate([acc, subtract(box[None], acc)])
    return acc


def seeded(seed):
    return random.Random(seed)


def _wide_ip(rng):
    if rng.random() < 0.25:
        return ANY
    base = rng.choice([10, 172, 192, 203])
    plen = rng.choice([8, 12, 16, 20, 24, 28, 32])
    addr = (base << 24) | rng.getrandbits(24)
    addr &= (0xFFFFFFFF << (32 - plen)) & 0xFFFFFFFF
    return f"{addr >> 24}.{(addr >> 16) & 255}.{(addr >> 8) & 255}.{addr & 255}/{plen}"


def _wide_port(rng):
    kind = rng.random()
    if kind < 0.4:
        return ANY
    if kind < 0.7:
        return str(rng.choice([22, 25, 53, 80, 443, 8080, rng.randint(0, 65535)]))
    lo = rng.randint(0, 65535)
    return f"{lo}-{min(65535, lo + rng.randint(0, 20000))}"


def rand_wide_policy(rng, n, d=None):
    """``n`` rules over the full 32-bit/16-bit domain with plenty of overlap."""
    d = d or Domain()
    rules = []
    for i in range(n):
        proto = rng.choice(["TCP", "UDP", "ICMP", ANY])
        icmp = proto == "ICMP"
        rules.append(make_rule(
            d, index=i + 1, protocol=proto, direction=rng.choice(["INPUT", "OUTPUT"]),
            src_ip=_wide_ip(rng), src_port=ANY if icmp else _wide_port(rng),
            dst_ip=_wide_ip(rng), dst_port=ANY if icmp else _wide_port(rng),
            action=rng.choice(ACTIONS)))
    return Policy(tuple(rules), Action.DENY, d)
