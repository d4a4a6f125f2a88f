import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qid.codes import LinearCode, SyndromeFamily
from qid.hashing import UhfF, UhfG, mac_tag
from qid.protocols import (KeyStore, Mode, Reason, SessionParams, SpotCheck, mutual_qid_run,
                           qidplus_recover, qkd_run, run_session, spot_check_passes)
from qid.protocols.machines import ServerMachine, UserMachine, mac_message
from qid.protocols.messages import (AbortMsg, DecisionMsg, Decision, GMsg, OtpW, TG, TestZTag,
                                    ThetaF, ThetaJSF, ZMsg)
from qid.protocols.runner import S2U, U2S, session_rngs
from qid.qchannel import Channel

MODES = ["qid", "qid_noisy", "qidplus", "qkd", "mutual"]


def make(mode, n=32, m=4, ell=8, **kw):
    extra = dict(kw)
    if mode == "qkd":
        extra.setdefault("sk_len", 24)
    return SessionParams.build(mode, n, m, ell, **extra)


def keys_for(p, w, seed=0):
    return KeyStore.generate(p, np.random.default_rng(seed), w)


@pytest.mark.parametrize("mode", MODES)
@pytest.mark.parametrize("m,n", [(2, 8), (4, 16), (8, 16)])
def test_completeness_every_password(mode, m, n):
    p = make(mode, n=n, m=m, ell=4)
    for w in range(1, m + 1):
        k = keys_for(p, w)
        for seed in range(10):
            res = run_session(p, k, seed=seed)
            assert res.server.accept and res.user.accept, (w, seed, res.server)


@pytest.mark.parametrize("mode", MODES)
def test_wrong_password_rejected(mode):
    p = make(mode, n=64, m=8, ell=16)
    rejected = 0
    for seed in range(50):
        k = keys_for(p, 1 + seed % 8, seed)
        other = KeyStore(k.w % 8 + 1, k.mac_key)
        res = run_session(p, k, other, seed=seed)
        if mode == "mutual":
            # a random z' passes the closeness test with P[Bin(l, 1/2) <= l/4];
            # the user's flip-set check still catches the impostor
            rejected += not res.user.accept
        else:
            rejected += not res.server.accept
    assert rejected == 50


def test_z_recomputed_from_logged_values():
    p = make("qid", n=8, m=2, ell=4)
    res = run_session(p, keys_for(p, 2), seed=7)
    u, s = res.user_machine, res.server_machine
    code = p.basis_code
    i_w = np.flatnonzero(u.theta == code.encode(2))
    f = UhfF.from_key_bits(s.f_key, 4, 8)
    g = UhfG.from_key_bits(s.g.key_bits, 2, 4)
    assert np.array_equal(u.z, f(u.x[i_w]) ^ g(2))
    assert res.server.accept


def test_tag_recomputed_from_transcript_values():
    p = make("qidplus", n=32, m=4, ell=8)
    k = keys_for(p, 3)
    res = run_session(p, k, seed=2)
    u, s = res.user_machine, res.server_machine
    mask = np.zeros(32, np.uint8)
    mask[s.t_idx] = 1
    msg = mac_message(u.theta, u.j, u.s, u.f.key_bits, s.g.key_bits, mask, u.x[s.t_idx], u.z, u.y)
    sent = [r for r in res.transcript.records if r["frame"] == "TEST_Z_TAG"]
    assert sent and res.server.accept
    assert np.array_equal(mac_tag(k.mac_key, msg), mac_tag(k.mac_key, msg))
    assert s.recover(u.x[s.t_idx]).tolist() == u.y.tolist()


def tamper(frame_cls, attr, bit=0):
    def link(direction, msg):
        if isinstance(msg, frame_cls):
            arr = getattr(msg, attr).copy()
            arr[bit] ^= 1
            setattr(msg, attr, arr)
        return [msg]
    return link


def test_z_tamper_qid():
    p = make("qid")
    res = run_session(p, keys_for(p, 1), seed=1, link=tamper(ZMsg, "z"))
    assert res.server.reason is Reason.Z_MISMATCH


@pytest.mark.parametrize("frame,attr,allowed", [
    (TestZTag, "z", {Reason.MAC_FAIL}),
    (TestZTag, "test", {Reason.MAC_FAIL}),
    (TestZTag, "tag", {Reason.MAC_FAIL}),
    (ThetaJSF, "f_key", {Reason.MAC_FAIL}),
    (ThetaJSF, "theta", {Reason.MAC_FAIL, Reason.DECODE_FAIL}),
    (ThetaJSF, "s", {Reason.MAC_FAIL, Reason.DECODE_FAIL}),
])
def test_qidplus_tamper(frame, attr, allowed):
    p = make("qidplus", n=64, m=4, ell=16)
    k = keys_for(p, 2)
    for seed in range(20):
        res = run_session(p, k, seed=seed, link=tamper(frame, attr, bit=seed % 8))
        assert res.server.reason in allowed


def test_replayed_g_is_violation():
    p = make("qid")
    def link(direction, msg):
        return [msg, msg] if isinstance(msg, GMsg) else [msg]
    res = run_session(p, keys_for(p, 1), seed=3, link=link)
    # the server already decided on z; the duplicate only reaches the user
    assert res.user.reason is Reason.PROTOCOL_VIOLATION


def test_out_of_phase_server_message_is_violation():
    p = make("qid")
    def link(direction, msg):
        return [msg, msg] if isinstance(msg, ThetaF) else [msg]
    res = run_session(p, keys_for(p, 1), seed=3, link=link)
    assert res.server.reason is Reason.PROTOCOL_VIOLATION
    assert not res.user.accept


def test_blocked_message_aborts_both():
    p = make("qidplus")
    res = run_session(p, keys_for(p, 1), seed=3, link=lambda d, m: [] if isinstance(m, TG) else [m])
    assert res.server.reason is Reason.ABORTED and res.user.reason is Reason.ABORTED


def test_session_replays_identically():
    p = make("qidplus")
    k = keys_for(p, 2)
    a = run_session(p, k, seed=11, phi=0.05, eta=0.1, reveal=True)
    b = run_session(p, k, seed=11, phi=0.05, eta=0.1, reveal=True)
    assert a.transcript.lines() == b.transcript.lines()
    assert a.server == b.server


def test_key_store_never_mutated():
    p = make("qkd", n=64, m=4, ell=8)
    k = keys_for(p, 2)
    before = k.digest()
    run_session(p, k, seed=1, link=tamper(TestZTag, "tag"))
    run_session(p, k, seed=2, link=lambda d, m: [] if isinstance(m, OtpW) else [m])
    run_session(p, k, KeyStore(1, k.mac_key), seed=3)
    assert k.digest() == before
    assert run_session(p, k, seed=4).user.accept


# --------------------------------------------------------------------------
# recovery

def _recovery_setup(n=24, seed=0):
    rng = np.random.default_rng(seed)
    fam = SyndromeFamily.fixed(LinearCode.hamming(4))  # n' = 15, radius 1
    codeword = rng.integers(0, 2, n, dtype=np.uint8)
    theta = codeword.copy()
    theta[rng.choice(n, n // 3, replace=False)] ^= 1
    i_w = np.flatnonzero(theta == codeword)
    x = rng.integers(0, 2, n, dtype=np.uint8)
    t_idx = np.sort(rng.choice(n, 4, replace=False))
    c = codeword.copy()
    c[t_idx] = rng.integers(0, 2, 4, dtype=np.uint8)
    return fam, codeword, theta, i_w, x, t_idx, c


def test_recovery_overwrites_wrong_basis_positions_from_test():
    fam, codeword, theta, i_w, x, t_idx, c = _recovery_setup()
    x_prime = x.copy()
    wrong = t_idx[c[t_idx] != codeword[t_idx]]
    x_prime[wrong] ^= 1  # those measurements are garbage
    s = fam.syndrome_bits(5, x[i_w])
    out = qidplus_recover(x_prime[i_w], x[t_idx], t_idx, theta, c, codeword, s, 5, fam)
    assert np.array_equal(out, x[i_w])


def test_recovery_within_radius_and_beyond():
    fam, codeword, theta, i_w, x, t_idx, c = _recovery_setup(seed=1)
    y = x[i_w]
    s = fam.syndrome_bits(0, y)
    outside = [k for k, i in enumerate(i_w) if i not in t_idx and k < fam.length]
    for k in outside:  # every single error outside T
        xp = x.copy()
        xp[i_w[k]] ^= 1
        assert np.array_equal(qidplus_recover(xp[i_w], x[t_idx], t_idx, theta, c, codeword, s, 0, fam), y)
    for a, b in itertools.combinations(outside, 2):  # radius + 1
        xp = x.copy()
        xp[i_w[[a, b]]] ^= 1
        out = qidplus_recover(xp[i_w], x[t_idx], t_idx, theta, c, codeword, s, 0, fam)
        assert out is None or not np.array_equal(out, y)


def test_beyond_radius_never_silently_accepted():
    p = make("qidplus", n=64, m=2, ell=8, delta_tolerance=0.01)
    k = keys_for(p, 1)
    for seed in range(40):
        res = run_session(p, k, seed=seed, phi=0.15)
        if res.server.accept:
            u, s = res.user_machine, res.server_machine
            assert np.array_equal(s.recover(u.x[s.t_idx]), u.y)


def test_noisy_acceptance_at_moderate_n():
    p = make("qidplus", n=1024, m=8, ell=64, delta_tolerance=0.05)
    k = keys_for(p, 5)
    acc = sum(run_session(p, k, seed=s, phi=0.02).server.accept for s in range(40))
    assert acc >= 36


def test_spot_check_rules():
    p = make("qidplus", delta_tolerance=0.05)
    flat = make("qidplus", delta_tolerance=0.05, test_rule=SpotCheck.FLAT)
    exact = make("qidplus")
    assert spot_check_passes(0, 30, exact) and not spot_check_passes(1, 30, exact)
    assert not spot_check_passes(1, 30, flat)
    assert spot_check_passes(1, 30, p)
    assert not spot_check_passes(8, 30, p)


# --------------------------------------------------------------------------
# QKD and mutual identification

def test_qkd_honest_keys_agree():
    p = make("qkd", n=128, m=8, ell=16, sk_len=40)
    k = keys_for(p, 6)
    sk_u, sk_s, dec = qkd_run(p, k, seed=3)
    assert dec.accept and sk_u is not None and np.array_equal(sk_u, sk_s)
    assert sk_u.size == 40 - p.w_bits


def test_qkd_blocked_confirmation_then_reuse():
    p = make("qkd", n=128, m=8, ell=16, sk_len=40)
    k = keys_for(p, 6)
    sk_u, sk_s, dec = qkd_run(p, k, seed=3, link=lambda d, m: [] if isinstance(m, OtpW) else [m])
    assert dec.accept and sk_s is not None and sk_u is None
    sk_u, sk_s, dec = qkd_run(p, k, seed=4)
    assert dec.accept and np.array_equal(sk_u, sk_s)


def test_qkd_tampered_confirmation():
    p = make("qkd", n=128, m=8, ell=16, sk_len=40)
    sk_u, sk_s, dec = qkd_run(p, keys_for(p, 1), seed=3, link=tamper(OtpW, "c"))
    assert dec.accept and sk_u is None


def test_mutual_honest_and_wrong_server():
    p = make("mutual", n=64, m=4, ell=128, flip_prob=0.1, closeness_threshold=0.25)
    k = keys_for(p, 3)
    ok = sum(all(d.accept for d in mutual_qid_run(p, k, seed=s)) for s in range(200))
    assert ok >= 198
    bad = KeyStore(4)
    user_rejects = sum(not mutual_qid_run(p, k, bad, seed=s)[1].accept for s in range(200))
    assert user_rejects >= 198


def test_mutual_with_zero_flips_is_qid():
    kw = dict(n=32, m=4, ell=16)
    p_mut = make("mutual", flip_prob=0.0, **kw)
    p_qid = SessionParams.build("qid", basis_code=p_mut.basis_code, **kw)
    k = KeyStore(2)
    a = run_session(p_mut, k, seed=9)
    b = run_session(p_qid, k, seed=9)
    assert a.transcript.lines() == b.transcript.lines()


def test_mutual_forged_flip_set_rejected_by_user():
    p = make("mutual", n=64, m=4, ell=64, flip_prob=0.1)
    def link(direction, msg):
        if isinstance(msg, DecisionMsg) and msg.decision.accept:
            msg = DecisionMsg(msg.decision, tuple(sorted(set(msg.flips) ^ {0})))
        return [msg]
    _, user = mutual_qid_run(p, KeyStore(1), seed=2, link=link)
    assert user.reason is Reason.Z_MISMATCH


# --------------------------------------------------------------------------
# totality

@st.composite
def random_message(draw, p):
    bits = lambda n: np.array(draw(st.lists(st.integers(0, 1), min_size=n, max_size=n)), np.uint8)
    size = draw(st.sampled_from([0, 1, p.ell, p.n, p.f_key_bits, p.g_key_bits]))
    kind = draw(st.sampled_from(["ThetaF", "ThetaJSF", "GMsg", "ZMsg", "TG", "TestZTag",
                                 "DecisionMsg", "OtpW"]))
    if kind == "ThetaF":
        return ThetaF(bits(size), bits(draw(st.sampled_from([size, p.f_key_bits]))))
    if kind == "ThetaJSF":
        return ThetaJSF(bits(p.n), draw(st.integers(0, 2**64 - 1)), bits(size), bits(p.f_key_bits))
    if kind == "GMsg":
        return GMsg(bits(size))
    if kind == "ZMsg":
        return ZMsg(bits(size))
    if kind == "TG":
        return TG(bits(p.n), bits(size))
    if kind == "TestZTag":
        return TestZTag(bits(size), bits(p.ell), bits(p.ell))
    if kind == "OtpW":
        return OtpW(bits(size))
    return DecisionMsg(Decision.ok(), (1, 2))


@settings(deadline=None, max_examples=300)
@given(st.sampled_from(MODES), st.integers(0, 3), st.data())
def test_machines_are_total(mode, steps, data):
    p = make(mode, n=16, m=4, ell=4)
    k = keys_for(p, 2)
    rngs = session_rngs(0)
    ch = Channel(source_rng=rngs["source"], medium_rng=rngs["medium"])
    user = UserMachine(p, k, rngs["user"], ch)
    server = ServerMachine(p, k, rngs["server"], ch)
    out = user.start()
    server.handle(type(out[0])(ch.transmit(out[0].batch)))
    for msg in out[1:]:
        server.handle(msg)
    for target in (user, server):
        for _ in range(steps + 1):
            target.handle(data.draw(random_message(p)))
    for target in (user, server):
        if target.terminal:
            assert target.decision is not None
