#!/usr/bin/env python3
"""Run the adversary experiments and write one CSV row per experiment.

Defaults are desk-sized (a few minutes); ``--trials 10000`` reproduces the
acceptance-scale runs.
"""

import argparse
import csv
import time
from pathlib import Path

from qid.adversaries import (AttackSpec, BasesRule, Strategy, make_schedule, run_dishonest_server_experiment,
                             run_impersonation_experiment, run_mitm_experiment, run_reuse_experiment,
                             single_qubit_code, sj_distinctness_audit)
from qid.protocols import SessionParams
from qid.protocols.messages import FrameType


def experiments(trials: int, seed: int):
    build = SessionParams.build
    one_qubit = dict(positions=(0,), bases=BasesRule.PLUS)
    yield "impersonation qid", lambda: run_impersonation_experiment(
        build("qid", 64, 8, 16), AttackSpec(Strategy.GUESS_USER, trials=trials, seed=seed))
    yield "impersonation qidplus", lambda: run_impersonation_experiment(
        build("qidplus", 64, 8, 16), AttackSpec(Strategy.GUESS_USER, trials=trials, seed=seed))
    yield "dishonest server", lambda: run_dishonest_server_experiment(
        build("qid", 512, 4, 32), AttackSpec(Strategy.GUESS_SERVER, trials=trials, seed=seed))
    yield "single-qubit mitm qid", lambda: run_mitm_experiment(
        build("qid", 64, 2, 16, basis_code=single_qubit_code(64)),
        AttackSpec(Strategy.INTERCEPT_RESEND, trials=trials, seed=seed, **one_qubit))
    yield "single-qubit mitm qidplus", lambda: run_mitm_experiment(
        build("qidplus", 64, 2, 16, basis_code=single_qubit_code(64)),
        AttackSpec(Strategy.INTERCEPT_RESEND, trials=trials, seed=seed, **one_qubit))
    yield "intercept-resend qidplus", lambda: run_mitm_experiment(
        build("qidplus", 512, 4, 64), AttackSpec(Strategy.INTERCEPT_RESEND, trials=min(trials, 300), seed=seed))
    yield "bitflip qidplus", lambda: run_mitm_experiment(
        build("qidplus", 64, 4, 16),
        AttackSpec(Strategy.BITFLIP, frame=FrameType.TEST_Z_TAG, bit=5, trials=min(trials, 1000), seed=seed))
    yield "replay qidplus", lambda: run_mitm_experiment(
        build("qidplus", 64, 4, 16), AttackSpec(Strategy.REPLAY, trials=min(trials, 1000), seed=seed))
    yield "reuse qidplus", lambda: run_reuse_experiment(
        build("qidplus", 64, 4, 16), make_schedule(100, 0.5, seed), seed)
    yield "S_j distinctness", lambda: sj_distinctness_audit(build("qid", 64, 8, 16), trials, seed)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--trials", type=int, default=2000)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--out", type=Path, default=Path("attacks.csv"))
    args = ap.parse_args(argv)

    rows = []
    for label, run in experiments(args.trials, args.seed):
        t0 = time.perf_counter()
        report = run()
        row = {"experiment": label, **report.csv_row(), "seconds": round(time.perf_counter() - t0, 2)}
        rows.append(row)
        lo, hi = report.interval
        print(f"{label:28s} {report.accepts:6d}/{report.trials:<6d} [{lo:.2e}, {hi:.2e}] "
              f"bound={report.bound} consistent={report.consistent}")
    keys = list(dict.fromkeys(k for r in rows for k in r))
    with open(args.out, "w", newline="") as fh:
        writer = csv.DictWriter(fh, keys)
        writer.writeheader()
        writer.writerows(rows)
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
