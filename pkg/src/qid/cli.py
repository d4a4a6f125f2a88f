"""Command line entry point.

Exit codes: 0 success, 1 reject / violation / failed check, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .adversaries import (AttackSpec, Strategy, make_schedule, run_dishonest_server_experiment,
                          run_impersonation_experiment, run_mitm_experiment, run_reuse_experiment,
                          sj_distinctness_audit)
from .analysis import bounds, hash_audits, sweeps
from .config import append_session_key, bits_hex, load_config, load_or_create_keystore
from .net import listen, loopback_session, run_user, serve_proxy, serve_server
from .protocols.messages import FrameType
from .protocols.runner import run_session

OK, REJECT, USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _session_flags() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("session")
    g.add_argument("--config", help="key = value file; flags given here win")
    g.add_argument("--mode", choices=["qid", "qid_noisy", "qidplus", "qkd", "mutual"])
    g.add_argument("--n", type=int)
    g.add_argument("--m", type=int)
    g.add_argument("--ell", "--l", dest="ell", type=int)
    g.add_argument("--lambda", dest="lam", type=float)
    g.add_argument("--q", type=float)
    g.add_argument("--phi", type=float)
    g.add_argument("--eta", type=float)
    g.add_argument("--delta-tolerance", dest="delta_tolerance", type=float)
    g.add_argument("--seed", type=int)
    g.add_argument("--code-seed", dest="code_seed", type=int)
    g.add_argument("--sk-len", dest="sk_len", type=int)
    g.add_argument("--endpoint")
    g.add_argument("--keystore")
    g.add_argument("--timeout", type=float)
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qid", description="password identification over a simulated BB84 channel")
    sub = parser.add_subparsers(dest="command", required=True)
    common = _session_flags()

    p = sub.add_parser("params", help="print bound reports")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--q", type=float, default=0.0)
    p.add_argument("--lambda", dest="lam", type=float, default=0.05)
    p.add_argument("--ell", type=int)

    p = sub.add_parser("run", parents=[common], help="honest sessions, in memory or over TCP")
    p.add_argument("--sessions", type=int, default=1)
    p.add_argument("--w", type=int, help="password index (default: from the key store or seed)")
    p.add_argument("--net", action="store_true", help="loopback TCP with server and user threads")
    p.add_argument("--role", choices=["user", "server", "proxy"], help="run one networked role")
    p.add_argument("--upstream", help="server endpoint for --role proxy")
    p.add_argument("--transcript", help="write the JSON-lines transcript here (default stdout)")
    p.add_argument("--reveal", action="store_true", help="include hidden simulation state")

    p = sub.add_parser("attack", parents=[common], help="run an adversary experiment")
    p.add_argument("--strategy", required=True, choices=[s.value for s in Strategy])
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--w-guess", dest="w_guess", type=int)
    p.add_argument("--force-correct", action="store_true")
    p.add_argument("--positions", help="comma separated qubit positions")
    p.add_argument("--bases", choices=["random", "plus", "cross"], default="random")
    p.add_argument("--frame", choices=[f.name for f in FrameType])
    p.add_argument("--bit", type=int, default=0)
    p.add_argument("--schedule", type=int, help="reuse experiment with this many sessions")
    p.add_argument("--csv")

    p = sub.add_parser("qkd", parents=[common], help="run the key distribution mode")
    p.add_argument("--sessions", type=int, default=1)

    p = sub.add_parser("verify-lemmas", help="run the analysis sweeps")
    p.add_argument("--quick", action="store_true")
    p.add_argument("--csv")

    p = sub.add_parser("audit", parents=[common], help="S_j distinctness and MAC forgery audits")
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--mac-degree", type=int, default=4)
    p.add_argument("--mac-ell", type=int, default=2)
    return parser


CONFIG_KEYS = ("mode", "n", "m", "ell", "lam", "q", "phi", "eta", "delta_tolerance", "seed", "code_seed",
               "sk_len", "endpoint", "keystore", "timeout")


def _config(args, **forced):
    values = {k: getattr(args, k, None) for k in CONFIG_KEYS}
    values.update(forced)
    try:
        return load_config(args.config, **values)
    except (ValueError, OSError) as exc:
        raise UsageError(f"invalid configuration: {exc}") from exc


def _emit(lines, path=None):
    text = "\n".join(lines) + "\n"
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


# --------------------------------------------------------------------------

def cmd_params(args) -> int:
    try:
        reports = {"impersonation": bounds.impersonation_epsilon(args.n, args.m, args.q, args.lam),
                   "qidplus": bounds.qidplus_epsilon(args.n, args.m, args.q, args.lam, args.ell)}
        if args.ell is not None:
            reports["server"] = bounds.server_security_epsilon(args.m, args.ell)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    print(json.dumps({k: json.loads(r.to_json()) for k, r in reports.items()}, indent=1, sort_keys=True))
    return OK


def _keys(cfg, params, w=None):
    try:
        keys, _ = load_or_create_keystore(cfg.keystore, params, cfg.seed)
    except (ValueError, OSError) as exc:
        raise UsageError(f"key store: {exc}") from exc
    if w is not None:
        if not 1 <= w <= params.m:
            raise UsageError(f"--w must lie in 1..{params.m}")
        keys = type(keys)(w, keys.mac_key)
    return keys


def cmd_run(args) -> int:
    cfg = _config(args)
    params = cfg.params()
    keys = _keys(cfg, params, args.w)
    if args.role:
        return _run_role(args, cfg, params, keys)
    lines, all_ok = [], True
    for i in range(args.sessions):
        seed = cfg.seed + i
        if args.net:
            res = loopback_session(params, keys, seed=seed, timeout=cfg.timeout, phi=cfg.phi, eta=cfg.eta)
            server, user, transcript = res.server.decision, res.user.decision, res.server.transcript
        else:
            res = run_session(params, keys, seed=seed, phi=cfg.phi, eta=cfg.eta, reveal=args.reveal)
            server, user, transcript = res.server, res.user, res.transcript
        lines += transcript.lines()
        lines.append(json.dumps({"session": i, "seed": seed, "server": str(server), "user": str(user)}))
        all_ok &= server.accept and user.accept
    _emit(lines, args.transcript)
    return OK if all_ok else REJECT


def _run_role(args, cfg, params, keys) -> int:
    if args.role == "server":
        with listen(cfg.endpoint) as sock:
            out = serve_server(params, keys, sock, cfg.seed, cfg.timeout, cfg.phi, cfg.eta)
    elif args.role == "user":
        out = run_user(params, keys, cfg.endpoint, cfg.seed, cfg.timeout, cfg.phi, cfg.eta)
    else:
        if not args.upstream:
            raise UsageError("--role proxy needs --upstream")
        with listen(cfg.endpoint) as sock:
            log = serve_proxy(params, sock, args.upstream, None, cfg.seed, cfg.timeout)
        print(json.dumps({"frames": [[d, k.name] for d, k in log.seen], "errors": log.errors}))
        return OK if not log.errors else REJECT
    _emit(out.transcript.lines() + [json.dumps({"decision": str(out.decision), "error": out.error})],
          args.transcript)
    return OK if out.decision.accept else REJECT


def cmd_attack(args) -> int:
    cfg = _config(args)
    params = cfg.params()
    positions = None
    if args.positions:
        try:
            positions = tuple(int(v) for v in args.positions.split(","))
        except ValueError as exc:
            raise UsageError("--positions takes comma separated integers") from exc
    try:
        spec = AttackSpec(args.strategy, w_guess=args.w_guess, force_correct=args.force_correct,
                          positions=positions, bases=args.bases,
                          frame=FrameType[args.frame] if args.frame else None, bit=args.bit,
                          trials=args.trials, seed=cfg.seed).validate(params)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    s = spec.strategy
    if args.schedule:
        report = run_reuse_experiment(params, make_schedule(args.schedule, 0.5, cfg.seed), cfg.seed)
    elif s in (Strategy.GUESS_USER, Strategy.HONEST):
        report = run_impersonation_experiment(params, spec)
    elif s is Strategy.GUESS_SERVER:
        report = run_dishonest_server_experiment(params, spec)
    else:
        report = run_mitm_experiment(params, spec)
    print(report.to_json())
    if args.csv:
        import csv
        with open(args.csv, "w", newline="") as fh:
            row = report.csv_row()
            w = csv.DictWriter(fh, list(row))
            w.writeheader()
            w.writerow(row)
    return OK if report.consistent else REJECT


def cmd_qkd(args) -> int:
    cfg = _config(args, mode="qkd")
    params = cfg.params()
    keys = _keys(cfg, params)
    ok = True
    for i in range(args.sessions):
        res = run_session(params, keys, seed=cfg.seed + i, phi=cfg.phi, eta=cfg.eta)
        accepted = res.server.accept and res.user.accept
        ok &= accepted
        out = {"session": i, "server": str(res.server), "user": str(res.user)}
        if accepted:
            out["sk_digest"] = bits_hex(res.sk_user)[:16]
            if cfg.keystore:
                append_session_key(cfg.keystore, res.sk_user)
        print(json.dumps(out))
    return OK if ok else REJECT


def cmd_verify(args) -> int:
    results = sweeps.run_suite(quick=args.quick)
    for r in results:
        print(r.summary())
    if args.csv:
        sweeps.write_csv(results, args.csv)
    return OK if all(r.passed for r in results) else REJECT


def cmd_audit(args) -> int:
    cfg = _config(args)
    params = cfg.params()
    sj = sj_distinctness_audit(params, args.trials, cfg.seed)
    mac = hash_audits.mac_forgery_audit(args.mac_degree, args.mac_ell)
    print(json.dumps({"sj_distinctness": sj.to_dict(),
                      "mac_forgery": {"degree": mac.degree, "tag_len": mac.tag_len,
                                      "impersonation": mac.impersonation, "substitution": mac.substitution,
                                      "bound": mac.bound, "holds": mac.holds}}, default=str, sort_keys=True))
    return OK if sj.extras["within_3sigma"] and mac.holds else REJECT


COMMANDS = {"params": cmd_params, "run": cmd_run, "attack": cmd_attack, "qkd": cmd_qkd,
            "verify-lemmas": cmd_verify, "audit": cmd_audit}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return USAGE if exc.code else OK
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"qid: error: {exc}", file=sys.stderr)
        return USAGE


if __name__ == "__main__":
    sys.exit(main())
