"""Compare the compiled and pure-Python kernel backends.

Times raw box subtraction plus partition and structural verification of random
full-domain policies. Run from the repository root::

    python3 benchmarks/bench_kernels.py --rules 25 50 100 --repeat 3
"""
import argparse
import random
import statistics
import time

import numpy as np

from fwportion import _backend
from fwportion.model import ANY, Action, Domain, Policy, make_rule
from fwportion.portions import partition, verify_partition

PROTOCOLS = ["TCP", "UDP", "ICMP", ANY]


def wide_ip(rng):
    if rng.random() < 0.25:
        return ANY
    plen = rng.choice([8, 12, 16, 20, 24, 28, 32])
    addr = (rng.choice([10, 172, 192, 203]) << 24) | rng.getrandbits(24)
    addr &= (0xFFFFFFFF << (32 - plen)) & 0xFFFFFFFF
    return f"{addr >> 24}.{(addr >> 16) & 255}.{(addr >> 8) & 255}.{addr & 255}/{plen}"


def wide_port(rng):
    kind = rng.random()
    if kind < 0.4:
        return ANY
    if kind < 0.7:
        return str(rng.choice([22, 25, 53, 80, 443, rng.randint(0, 65535)]))
    lo = rng.randint(0, 65535)
    return f"{lo}-{min(65535, lo + rng.randint(0, 20000))}"


def random_policy(rng, n):
    d = Domain()
    rules = []
    for i in range(n):
        proto = rng.choice(PROTOCOLS)
        icmp = proto == "ICMP"
        rules.append(make_rule(
            d, index=i + 1, protocol=proto, direction=rng.choice(["INPUT", "OUTPUT"]),
            src_ip=wide_ip(rng), src_port=ANY if icmp else wide_port(rng),
            dst_ip=wide_ip(rng), dst_port=ANY if icmp else wide_port(rng),
            action=rng.choice(["ACCEPT", "DENY", "DROP"])))
    return Policy(tuple(rules), Action.DENY, d)


def random_boxes(rng, count):
    bounds = Domain().bounds
    out = np.empty((count, 6, 2), dtype=np.int64)
    for i in range(count):
        for k, b in enumerate(bounds):
            out[i, k] = sorted((rng.randint(0, b), rng.randint(0, b)))
    return out


def best(fn, repeat):
    times = []
    for _ in range(repeat):
        start = time.perf_counter()
        fn()
        times.append(time.perf_counter() - start)
    return min(times), statistics.median(times)


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--rules", type=int, nargs="+", default=[25, 50, 100])
    parser.add_argument("--boxes", type=int, default=60,
                        help="box count per operand; fragments grow steeply with it")
    parser.add_argument("--repeat", type=int, default=3)
    parser.add_argument("--seed", type=int, default=10)
    args = parser.parse_args(argv)

    backends = _backend.available()
    if len(backends) < 2:
        print(f"only {backends} available; build the extension to compare")
    rng = random.Random(args.seed)
    a, b = random_boxes(rng, args.boxes), random_boxes(rng, args.boxes)
    policies = {n: random_policy(random.Random(args.seed + n), n) for n in args.rules}

    rows = []
    before = _backend.name
    try:
        for name in backends:
            _backend.use(name)
            kern = _backend.kernels
            rows.append((name, f"subtract {args.boxes}x{args.boxes} boxes",
                         *best(lambda: kern.subtract(a, b), args.repeat)))
            for n, policy in policies.items():
                plist = partition(policy)
                rows.append((name, f"partition {n} rules ({len(plist)} portions)",
                             *best(lambda: partition(policy), args.repeat)))
                rows.append((name, f"verify {n} rules",
                             *best(lambda: verify_partition(plist), args.repeat)))
    finally:
        _backend.use(before)

    width = max(len(r[1]) for r in rows)
    print(f"{'backend':8}  {'case':{width}}  {'best s':>8}  {'median s':>8}")
    for name, case, lo, med in rows:
        print(f"{name:8}  {case:{width}}  {lo:8.3f}  {med:8.3f}")
    if len(backends) == 2:
        print()
        timed = {(name, case): lo for name, case, lo, _ in rows}
        for name, case, lo, _ in rows:
            if name == "python":
                print(f"speedup  {case:{width}}  {lo / timed['cython', case]:6.1f}x")


if __name__ == "__main__":
    main()
