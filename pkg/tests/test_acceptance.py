"""Acceptance gate: one test and one PASS/FAIL line per criterion."""

import json
import math
import time

import numpy as np
import pytest

from qid.adversaries import (AttackSpec, BasesRule, Strategy, make_schedule, run_impersonation_experiment,
                             run_mitm_experiment, run_reuse_experiment, single_qubit_code,
                             sj_collision_exact, sj_distinctness_audit)
from qid.analysis import bounds, hash_audits, sweeps
from qid.analysis.binary_entropy import h, h_inverse
from qid.analysis.entropy import smoothed_guessing_grid, smoothed_guessing_probability
from qid.analysis.quantum import exact_measurement_entropy
from qid.protocols import KeyStore, SessionParams, run_session
from qid.qchannel import leak_multipulse

pytestmark = pytest.mark.slow

TRIALS = 10_000


def test_completeness(criterion):
    c = criterion(1, "completeness")
    t0 = time.perf_counter()
    for mode in ("qid", "qidplus"):
        for m, n in ((2, 32), (4, 64), (8, 64)):
            p = SessionParams.build(mode, n, m, 8)
            mac = KeyStore.generate(p, np.random.default_rng(m)).mac_key
            rejected = 0
            for w in range(1, m + 1):
                for seed in range(100):
                    res = run_session(p, KeyStore(w, mac), seed=seed)
                    rejected += not (res.server.accept and res.user.accept)
            c.check(rejected == 0, f"{mode} m={m} n={n}: {100 * m - rejected}/{100 * m} accepted")
    elapsed = time.perf_counter() - t0
    c.check(elapsed < 10, f"{elapsed:.1f}s")
    c.verdict()


def test_impersonation_bound(criterion):
    c = criterion(2, "impersonation bound")
    t0 = time.perf_counter()
    p = SessionParams.build("qid", 64, 8, 16)
    r = run_impersonation_experiment(p, AttackSpec(Strategy.GUESS_USER, trials=TRIALS, seed=11))
    c.check(r.bound == 2.0 ** -10, f"bound m^2/2^l = {r.bound}")
    c.check(r.trials == TRIALS and r.consistent,
            f"{r.accepts}/{r.trials} accepts, allowed {r.allowed_accepts} (99% exact binomial)")
    elapsed = time.perf_counter() - t0
    c.check(elapsed < 120, f"{elapsed:.1f}s")
    c.verdict()


def test_sj_distinctness(criterion):
    c = criterion(3, "S_j distinctness")
    p = SessionParams.build("qid", 64, 8, 16)
    r = sj_distinctness_audit(p, TRIALS, seed=12)
    c.check(r.extras["within_3sigma"],
            f"{r.accepts}/{TRIALS} collisions vs {r.extras['three_sigma_limit']:.2e} (m^2/2^(l+1) + 3 sigma)")
    for n, ell in ((2, 1), (3, 2), (4, 1)):
        micro = SessionParams.build("qid", n, 2, ell)
        exact = sj_collision_exact(micro)
        c.check(exact == 2.0 ** -ell, f"exact n={n} l={ell}: {exact} == 2^-{ell}")
    c.verdict()


def test_mac_audits(criterion):
    c = criterion(4, "MAC audits")
    audit = hash_audits.mac_forgery_audit(4, 2)
    c.check(audit.impersonation <= 2 ** -2 and audit.substitution <= 2 ** -2,
            f"forgery {audit.impersonation}, substitution {audit.substitution} <= 1/4")
    res = sweeps.sweep_mac(10)
    c.check(res.passed, f"extractor distance t<=10: {len(res.rows)} checks, {len(res.failures)} failures")
    c.verdict()


def test_entropy_splitting(criterion):
    c = criterion(5, "entropy splitting")
    t0 = time.perf_counter()
    res = sweeps.sweep_entropy_splitting(1000)
    checks = [r for r in res.rows if "pair" not in r["inputs"]]
    c.check(res.passed, f"{len(checks)} splitting checks ({res.skipped} not applicable), "
                        f"{len(res.failures)} violations")
    # water-filling against the grid oracle on random tables
    rng = np.random.default_rng(55)
    worst = 0.0
    for _ in range(200):
        shape = (int(rng.integers(2, 5)), int(rng.integers(1, 5)))
        p = rng.dirichlet(np.ones(shape[0] * shape[1])).reshape(shape)
        for eps in (0.0, 0.05):
            wf = smoothed_guessing_probability(p, eps)
            grid = smoothed_guessing_grid(p, eps)
            worst = max(worst, (grid - wf) / (shape[1] * 1e-3), wf - grid)
    c.check(worst <= 1 + 1e-9, f"grid oracle agrees within its step (worst ratio {worst:.3f})")
    elapsed = time.perf_counter() - t0
    c.check(elapsed < 300, f"{elapsed:.1f}s")
    c.verdict()


def test_privacy_amplification(criterion):
    c = criterion(6, "privacy amplification")
    res = sweeps.sweep_privacy_amplification(100)
    anchors = [r for r in res.rows if "anchor" in r["inputs"]]
    c.check(len(anchors) == 3 and all(r["margin"] >= 0 for r in anchors),
            "anchors: distance 1/2 vs bound 0.70711, masked uniform 0 (to 1e-12)")
    c.check(res.passed, f"{len(res.rows) - 3} enumerated instances, {len(res.failures)} violations")
    c.verdict()


def test_uncertainty_relation(criterion):
    c = criterion(7, "uncertainty relation")
    for n in (2, 3):
        psi = np.zeros(1 << n)
        psi[0] = 1
        value = exact_measurement_entropy(psi)[0]
        c.check(abs(value - n * math.log2(4 / 3)) <= 1e-9, f"product n={n}: {value:.12f}")
    res = sweeps.sweep_uncertainty(1000)
    c.check(res.passed, f"{len(res.rows)} random-state checks, {len(res.failures)} violations")
    c.verdict()


def test_markov_decomposition(criterion):
    c = criterion(8, "decomposition lemma")
    res = sweeps.sweep_markov(100)
    worst = max(-r["value"] for r in res.rows)
    c.check(res.passed, f"{len(res.rows)} instances, worst residual {worst:.1e} (tau PSD, unit trace)")
    c.verdict()


def test_man_in_the_middle(criterion):
    c = criterion(9, "man in the middle")
    t0 = time.perf_counter()
    spec = AttackSpec(Strategy.INTERCEPT_RESEND, positions=(0,), bases=BasesRule.PLUS, trials=TRIALS, seed=9)
    code = single_qubit_code(64)
    leak = run_mitm_experiment(SessionParams.build("qid", 64, 2, 16, basis_code=code), spec)
    c.check(leak.extras["max_posterior_dev"] >= 0.05,
            f"Q-ID posterior deviation {leak.extras['max_posterior_dev']:.3f} >= 0.05")
    safe = run_mitm_experiment(SessionParams.build("qidplus", 64, 2, 16, basis_code=code), spec)
    c.check(safe.extras["no_sharpening"],
            f"Q-ID+ deviation {safe.extras['max_posterior_dev']:.4f} within 0.01 + 3 sigma")
    rejects = {k: v for k, v in safe.reasons.items() if k != "OK"}
    c.check(set(rejects) <= {"MAC_FAIL", "TEST_MISMATCH"}, f"Q-ID+ rejections {rejects}")
    full = run_mitm_experiment(SessionParams.build("qidplus", 512, 4, 64),
                               AttackSpec(Strategy.INTERCEPT_RESEND, trials=300, seed=10))
    c.check(full.accepts <= 0.01 * full.trials, f"full intercept-resend: {full.trials - full.accepts}/"
                                                 f"{full.trials} rejected")
    elapsed = time.perf_counter() - t0
    c.check(elapsed < 600, f"{elapsed:.1f}s")
    c.verdict()


def test_noise_tolerance(criterion):
    c = criterion(10, "noise tolerance")
    p = SessionParams.build("qidplus", 1024, 4, 64, delta_tolerance=0.05)
    keys = KeyStore.generate(p, np.random.default_rng(10))
    ok = sum(run_session(p, keys, seed=s, phi=0.02).server.accept for s in range(200))
    c.check(ok >= 190, f"honest accept {ok}/200 at phi=0.02")
    small = SessionParams.build("qidplus", 128, 4, 16)
    small_keys = KeyStore.generate(small, np.random.default_rng(0))
    exact = True
    flagged_total = 0
    for s in range(20):
        record = {}

        def tap(handle, record=record):
            record["leaked"] = leak_multipulse(handle)

        res = run_session(small, small_keys, seed=s, eta=0.1, tap=tap, reveal=True)
        prep = next(e for e in map(json.loads, res.transcript.channel_lines) if e["event"] == "prepare")
        flags = [i for i, ch in enumerate(prep["hidden"]["flags"]) if ch == "1"]
        x, theta = res.user_machine.x, res.user_machine.theta
        leaked = record["leaked"]
        flagged_total += len(flags)
        exact &= [i for i, _, _ in leaked] == flags
        exact &= all(b == x[i] and t == theta[i] for i, b, t in leaked)
    c.check(exact and flagged_total > 0, f"multipulse leak equals the {flagged_total} flagged positions")
    c.verdict()


def test_key_reuse(criterion):
    c = criterion(11, "key reuse")
    p = SessionParams.build("qidplus", 64, 4, 16)
    r = run_reuse_experiment(p, make_schedule(100, 0.5, seed=11), seed=11)
    c.check(r.accepts == r.trials == 50, f"honest sessions accepted {r.accepts}/{r.trials}")
    c.check(r.extras["digest_constant"] and r.extras["induced_failures"] == 50,
            f"key digest constant over 100 sessions, {r.extras['induced_failures']} induced failures")
    for mode in ("qid", "qidplus"):
        rp = run_mitm_experiment(SessionParams.build(mode, 64, 4, 16),
                                 AttackSpec(Strategy.REPLAY, trials=1000, seed=12))
        c.check(rp.accepts == 0, f"{mode} replay accepts {rp.accepts}/1000")
    c.verdict()


def test_parameter_calculators(criterion):
    c = criterion(12, "parameter calculators")
    c.check(h_inverse(1.0) == 0.5, "h^-1(1) = 1/2")
    c.check(abs(h(0.25) - (2 - 0.75 * math.log2(3))) <= 1e-6, "h(1/4) = 2 - 3/4 log2 3")
    n_quarter = 3 / (1 - h(0.25))          # log m / n = 1 - h(1/4), so mu = 1/4 at m = 8
    imp = bounds.impersonation_epsilon(n_quarter, 8, 0, 0.05)
    c.check(abs(imp.derived["mu"] - 0.25) <= 1e-6, f"impersonation mu = {imp.derived['mu']:.9f}")
    wide = bounds.impersonation_epsilon(10 ** 9, 2, 0, 0.05)
    c.check(abs(wide.derived["mu"] - 0.5) <= 1e-3, f"mu -> h^-1(1) as log m / n -> 0: {wide.derived['mu']:.6f}")
    srv = bounds.server_security_epsilon(8, 16)
    c.check(abs(srv.epsilon - 2 ** -10) <= 1e-6 * 2 ** -10, "m^2/2^l = 2^-10 at m=8, l=16")
    plus = bounds.qidplus_epsilon(4096, 8, 10, 0.05)
    expected = (0.25 - 0.05) * plus.derived["d"] - 3 - 20 - 3 * plus.derived["ell"]
    c.check(abs(plus.exponents["privacy"] - expected) <= 1e-6, "Q-ID+ privacy argument")
    same = all(r.recompute().to_json() == r.to_json() for r in (imp, wide, srv, plus))
    c.check(same and bounds.qidplus_epsilon(4096, 8, 10, 0.05).to_json() == plus.to_json(),
            "bit-reproducible")
    c.verdict()
