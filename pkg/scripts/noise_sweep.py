#!/usr/bin/env python3
"""Honest acceptance of the noisy modes as the channel error rate grows."""

import argparse
import csv

import numpy as np

from qid.protocols import KeyStore, SessionParams, run_session


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=1024)
    ap.add_argument("--m", type=int, default=4)
    ap.add_argument("--ell", type=int, default=64)
    ap.add_argument("--delta", type=float, default=0.05)
    ap.add_argument("--sessions", type=int, default=100)
    ap.add_argument("--out", default="noise.csv")
    args = ap.parse_args(argv)

    rows = []
    for mode in ("qid_noisy", "qidplus"):
        p = SessionParams.build(mode, args.n, args.m, args.ell, delta_tolerance=args.delta)
        keys = KeyStore.generate(p, np.random.default_rng(0))
        for phi in np.linspace(0, args.delta, 6)[:-1]:
            ok = sum(run_session(p, keys, seed=s, phi=float(phi)).server.accept for s in range(args.sessions))
            rows.append({"mode": mode, "phi": round(float(phi), 4), "accepted": ok, "sessions": args.sessions})
            print(f"{mode:10s} phi={phi:.3f} accepted {ok}/{args.sessions}")
    with open(args.out, "w", newline="") as fh:
        writer = csv.DictWriter(fh, list(rows[0]))
        writer.writeheader()
        writer.writerows(rows)


if __name__ == "__main__":
    main()
