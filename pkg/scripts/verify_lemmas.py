#!/usr/bin/env python3
"""Run every analysis sweep and write the per-instance rows to CSV."""

import argparse
import sys

from qid.analysis import sweeps


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--quick", action="store_true", help="trimmed instance counts")
    ap.add_argument("--out", default="lemmas.csv")
    args = ap.parse_args(argv)
    results = sweeps.run_suite(quick=args.quick)
    for r in results:
        print(r.summary())
    sweeps.write_csv(results, args.out)
    print(f"wrote {args.out}")
    return 0 if all(r.passed for r in results) else 1


if __name__ == "__main__":
    sys.exit(main())
