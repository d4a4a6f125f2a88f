import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qid.adversaries import (AttackSpec, BasesRule, ExperimentReport, Link, Strategy, flip_message_bit,
                             make_schedule, run_dishonest_server_experiment, run_impersonation_experiment,
                             run_mitm_experiment, run_reuse_experiment, single_qubit_code,
                             sj_collision_exact, sj_distinctness_audit)
from qid.protocols import KeyStore, SessionParams, run_session
from qid.protocols.messages import FrameType, ThetaF, ZMsg


def qid(n=64, m=4, ell=8, **kw):
    return SessionParams.build("qid", n, m, ell, **kw)


# -- AttackSpec --------------------------------------------------------------

def test_spec_needs_frame_for_block_and_flip():
    with pytest.raises(ValueError):
        AttackSpec(Strategy.BLOCK_ABORT)
    with pytest.raises(ValueError):
        AttackSpec(Strategy.BITFLIP, frame=FrameType.QUBITS)


def test_spec_validates_against_params():
    p = qid()
    with pytest.raises(ValueError):
        AttackSpec(Strategy.GUESS_USER, w_guess=5).validate(p)
    with pytest.raises(ValueError):
        AttackSpec(Strategy.INTERCEPT_RESEND, positions=(64,)).validate(p)


def test_trial_rng_is_order_independent():
    spec = AttackSpec(seed=7)
    a = [spec.trial_rng(t).integers(0, 1 << 30) for t in range(5)]
    b = [spec.trial_rng(t).integers(0, 1 << 30) for t in reversed(range(5))]
    assert a == b[::-1]


@given(st.integers(0, 200))
@settings(max_examples=40, deadline=None)
def test_bitflip_changes_exactly_one_bit(bit):
    msg = ThetaF(np.zeros(16, np.uint8), np.ones(16, np.uint8))
    out = flip_message_bit(msg, bit)
    diff = sum(int((a != b).sum()) for a, b in zip(msg.fields(), out.fields()))
    assert diff == 1


def test_link_records_and_blocks():
    p = qid(n=32)
    link = Link(AttackSpec(Strategy.BLOCK_ABORT, frame=FrameType.Z))
    res = run_session(p, KeyStore(1), link=link)
    assert not res.server.accept and res.server_machine.terminal and res.user_machine.terminal
    assert isinstance(link.first(FrameType.Z), ZMsg)
    assert link.first(FrameType.DECISION) is None


# -- reports -----------------------------------------------------------------

def test_report_interval_and_slack():
    r = ExperimentReport("x", 10000, 5, bound=2 ** -10)
    lo, hi = r.interval
    assert lo <= r.rate <= hi
    assert r.allowed_accepts >= 10 and r.consistent
    assert not ExperimentReport("x", 10000, 40, bound=2 ** -10).consistent
    json.loads(r.to_json())
    with pytest.raises(ValueError):
        ExperimentReport("x", 3, 4)


# -- impersonation -----------------------------------------------------------

def test_impersonation_forced_correct_always_accepts():
    r = run_impersonation_experiment(qid(), AttackSpec(Strategy.GUESS_USER, force_correct=True, trials=30))
    assert r.accepts == r.trials == 30 and r.bound is None


def test_impersonation_honest_accepts():
    r = run_impersonation_experiment(qid(), AttackSpec(Strategy.HONEST, trials=20))
    assert r.rate == 1.0


def test_impersonation_wrong_guess_within_bound():
    p = qid(m=4, ell=8)
    r = run_impersonation_experiment(p, AttackSpec(Strategy.GUESS_USER, trials=400, seed=2))
    assert r.bound == pytest.approx(16 / 256)
    assert r.consistent, r.to_dict()


def test_impersonation_qidplus_with_known_mac_key():
    p = SessionParams.build("qidplus", 64, 4, 16)
    r = run_impersonation_experiment(p, AttackSpec(Strategy.GUESS_USER, trials=100))
    assert r.accepts == 0


def test_impersonation_rejects_other_strategies():
    with pytest.raises(ValueError):
        run_impersonation_experiment(qid(), AttackSpec(Strategy.GUESS_SERVER))


# -- dishonest server --------------------------------------------------------

def test_server_with_right_guess_matches():
    r = run_dishonest_server_experiment(qid(), AttackSpec(Strategy.GUESS_SERVER, force_correct=True, trials=20))
    assert r.extras["same_guess_matches"] == r.extras["same_guess_trials"] == 20


def test_server_posterior_audit_passes_on_visible_data():
    r = run_dishonest_server_experiment(qid(n=128, ell=16), AttackSpec(Strategy.GUESS_SERVER, trials=600))
    assert r.extras["posterior_audit_passes"], r.posterior


def test_raw_audit_exposes_password_dependence():
    # with a fixed wrong guess, disagreements between x and x' on I_w track d(c(w), c(w'))
    p = qid(n=512, m=4, ell=32)
    r = run_dishonest_server_experiment(p, AttackSpec(Strategy.GUESS_SERVER, w_guess=1, trials=1500, seed=4),
                                        raw_audit=True)
    assert r.posterior["raw_disagreements"]["excess"] > 0
    assert r.extras["posterior_audit_passes"]


# -- man in the middle -------------------------------------------------------

SINGLE = dict(positions=(0,), bases=BasesRule.PLUS)


def test_single_qubit_code_differs_at_first_position():
    code = single_qubit_code(64)
    assert code.encode(1)[0] != code.encode(2)[0]


def test_single_qubit_attack_leaks_against_qid():
    p = qid(n=64, m=2, ell=16, basis_code=single_qubit_code(64))
    r = run_mitm_experiment(p, AttackSpec(Strategy.INTERCEPT_RESEND, trials=800, seed=5, **SINGLE))
    assert r.extras["max_posterior_dev"] >= 0.05
    assert not r.extras["no_sharpening"]
    # a rejection after a cross basis on qubit 0 identifies w
    rejected = r.posterior["((1,), False)"]
    assert len(rejected["by_w"]) == 1


def test_single_qubit_attack_does_not_leak_against_qidplus():
    p = SessionParams.build("qidplus", 64, 2, 16, basis_code=single_qubit_code(64))
    r = run_mitm_experiment(p, AttackSpec(Strategy.INTERCEPT_RESEND, trials=800, seed=5, **SINGLE))
    assert r.extras["no_sharpening"], r.posterior
    assert set(r.reasons) <= {"OK", "MAC_FAIL", "TEST_MISMATCH"}


def test_full_intercept_resend_rejected_by_qidplus():
    p = SessionParams.build("qidplus", 256, 4, 32)
    r = run_mitm_experiment(p, AttackSpec(Strategy.INTERCEPT_RESEND, trials=40))
    assert r.accepts == 0


@pytest.mark.parametrize("mode,frame", [("qid", FrameType.G), ("qid", FrameType.Z),
                                        ("qidplus", FrameType.T_G), ("qidplus", FrameType.TEST_Z_TAG),
                                        ("qid", FrameType.DECISION)])
def test_block_abort_leaves_keys_and_next_session_accepts(mode, frame):
    p = SessionParams.build(mode, 64, 4, 16)
    r = run_mitm_experiment(p, AttackSpec(Strategy.BLOCK_ABORT, frame=frame, trials=10))
    assert r.extras["keys_unchanged"] == 10 and r.extras["recovered"] == 10
    assert r.reasons["both_terminal"] == 10


@pytest.mark.parametrize("mode", ["qid", "qidplus"])
def test_replay_never_accepts(mode):
    p = SessionParams.build(mode, 64, 4, 16)
    r = run_mitm_experiment(p, AttackSpec(Strategy.REPLAY, trials=30))
    assert r.accepts == 0 and r.extras["keys_unchanged"] == 30


def test_bitflip_reports_reasons():
    p = SessionParams.build("qidplus", 64, 4, 16)
    r = run_mitm_experiment(p, AttackSpec(Strategy.BITFLIP, frame=FrameType.TEST_Z_TAG, bit=20, trials=10))
    assert r.accepts == 0 and r.reasons == {"MAC_FAIL": 10}


# -- reuse -------------------------------------------------------------------

def test_schedule_is_fixed_and_balanced():
    a, b = make_schedule(100, 0.5, seed=3), make_schedule(100, 0.5, seed=3)
    assert [str(x) for x in a] == [str(x) for x in b]
    assert sum(x == "honest" for x in a) == 50


@pytest.mark.parametrize("mode", ["qid", "qidplus"])
def test_reuse_keeps_keys_and_honest_sessions_accept(mode):
    p = SessionParams.build(mode, 64, 4, 16)
    r = run_reuse_experiment(p, make_schedule(30, 0.5, seed=1), seed=1)
    assert r.extras["digest_constant"] and r.accepts == r.trials == 15
    assert r.extras["induced_failures"] == 15


def test_reuse_qkd_keys_distinct():
    p = SessionParams.build("qkd", 128, 4, 16, sk_len=40)
    r = run_reuse_experiment(p, make_schedule(16, 0.5, seed=2), seed=2)
    assert r.extras["distinct_keys"] and r.extras["qkd_successes"] == 8


# -- S_j distinctness --------------------------------------------------------

@pytest.mark.parametrize("n,ell", [(2, 1), (3, 1), (3, 2), (4, 1)])
def test_sj_exact_collision_is_two_to_minus_ell(n, ell):
    # g(1) xor g(2) = a*(1 xor 2) truncated, uniform over the multiplier a
    p = qid(n=n, m=2, ell=ell)
    assert sj_collision_exact(p) == pytest.approx(2.0 ** -ell, abs=1e-15)


def test_sj_monte_carlo_within_bound():
    r = sj_distinctness_audit(qid(n=32, m=4, ell=6), trials=1500, seed=1)
    assert r.extras["within_3sigma"], r.to_dict()


def test_sj_degenerate_multiplier_is_flagged():
    r = sj_distinctness_audit(qid(n=16, m=4, ell=4), trials=200, degenerate_g=True)
    assert r.extras["degenerate_key_caveat"]
    # with the multiplier fixed to zero only f(x|I_j) collisions remain
    assert r.accepts > 0
