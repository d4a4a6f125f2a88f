#!/usr/bin/env python3
"""Regenerate the modulus tables in src/qid/gf2.py and src/qid/_moduli_large.py.

Small table: every degree 1..64.  Large table: the degree ladder used by
``qid.gf2.ladder_degree`` (multiples of 64 up to 2048, multiples of 256 up
to --max-degree).  Each entry is the lexicographically smallest irreducible
polynomial of its degree, written as the part below the leading term.
"""

import argparse
import sys
import time
from pathlib import Path

from qid.gf2 import LADDER_STEPS, smallest_irreducible


def ladder(max_degree):
    d = 64
    while d < max_degree:
        for limit, step in LADDER_STEPS:
            if d < limit:
                d += step
                break
        else:
            d += LADDER_STEPS[-1][1]
        if d <= max_degree:
            yield d


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--max-degree", type=int, default=12288)
    ap.add_argument("--out", type=Path,
                    default=Path(__file__).resolve().parents[1] / "src/qid/_moduli_large.py")
    args = ap.parse_args(argv)

    small = {d: smallest_irreducible(d) ^ (1 << d) for d in range(1, 65)}
    print("small:", {d: hex(v) for d, v in small.items()})

    lines = ['"""Generated by scripts/tabulate_moduli.py; do not edit."""', "", "LOW = {"]
    for d in ladder(args.max_degree):
        t = time.time()
        low = smallest_irreducible(d) ^ (1 << d)
        print(f"{d}: {low:#x}  ({time.time() - t:.1f}s)", file=sys.stderr, flush=True)
        lines.append(f"    {d}: {low:#x},")
        args.out.write_text("\n".join(lines + ["}", ""]))
    return 0


if __name__ == "__main__":
    sys.exit(main())
