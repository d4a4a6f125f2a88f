"""User and server state machines for every protocol mode.

A machine consumes one incoming message at a time and returns the list of
messages it sends in response.  Any message that does not fit the current
phase, or whose fields have the wrong sizes, ends the session with a
PROTOCOL_VIOLATION.  Key material is read, never written.

Message flow (U = user, S = server)::

    QID, MUTUAL      U: QUBITS, THETA_F        S: G      U: Z           S: DECISION
    QID_NOISY        U: QUBITS, THETA_J_S_F    S: G      U: Z           S: DECISION
    QIDPLUS          U: QUBITS, THETA_J_S_F    S: T_G    U: TEST_Z_TAG  S: DECISION
    QKD              as QIDPLUS, then S: OTP_W after an accepting DECISION
"""

from __future__ import annotations

import enum
import hashlib
from dataclasses import dataclass

import numpy as np
from scipy.stats import binom

from ..gf2 import bits_to_int, int_to_bits
from ..hashing import MacKey, UhfF, UhfG, encode_fields, mac_tag, mac_verify
from ..qchannel import Channel, honest_role
from .messages import (AbortMsg, Decision, DecisionMsg, GMsg, OtpW, PayloadError, QubitsMsg,
                       Reason, TestZTag, TG, ThetaF, ThetaJSF, ZMsg)
from .params import J_BITS, Mode, SessionParams, SpotCheck


@dataclass(frozen=True, eq=False)
class KeyStore:
    """Long-term secrets: password index w and (in authenticated modes) MAC key."""

    w: int
    mac_key: MacKey | None = None

    def digest(self) -> str:
        h = hashlib.sha256(self.w.to_bytes(4, "big"))
        if self.mac_key is not None:
            h.update(self.mac_key.digest().encode())
        return h.hexdigest()

    @classmethod
    def generate(cls, params: SessionParams, rng: np.random.Generator, w: int | None = None):
        w = int(rng.integers(1, params.m + 1)) if w is None else w
        mac = None
        if params.mode.authenticated:
            mac = MacKey.random(params.mac_message_bits, params.ell, rng)
        return cls(w, mac)


class Violation(Exception):
    """Malformed or out-of-phase input."""


def _check_bits(arr, size: int, what: str) -> np.ndarray:
    arr = np.asarray(arr, dtype=np.uint8)
    if arr.ndim != 1 or arr.size != size or (arr.size and arr.max() > 1):
        raise Violation(f"{what}: expected {size} bits")
    return arr


def mac_message(theta, j, s, f_key, g_key, t_mask, test, z, y, ext_key=None) -> np.ndarray:
    parts = [theta, int_to_bits(j, J_BITS), s, f_key, g_key, t_mask, test, z, y]
    if ext_key is not None:
        parts.append(ext_key)
    return encode_fields(parts)


def spot_check_passes(errors: int, size: int, params: SessionParams) -> bool:
    """Check (2): does test agree with test' on V closely enough?"""
    if size == 0 or params.delta_tolerance == 0:
        return errors == 0
    rate = params.delta_tolerance / 2
    if params.test_rule is SpotCheck.FLAT:
        return errors <= rate * size
    # p-value of seeing this many errors or more at error rate delta/2
    return errors == 0 or float(binom.sf(errors - 1, size, rate)) >= params.test_level


class _Machine:
    DONE = "done"

    def __init__(self, params: SessionParams, keys: KeyStore, rng: np.random.Generator,
                 channel: Channel):
        self.params = params
        self.keys = keys
        self.rng = rng
        self.channel = channel
        self.phase = None
        self.decision: Decision | None = None
        self.sk: np.ndarray | None = None

    @property
    def terminal(self) -> bool:
        return self.phase == self.DONE

    def _finish(self, decision: Decision):
        self.decision = decision
        self.phase = self.DONE

    def _violation_reply(self) -> list:
        return []

    def handle(self, msg) -> list:
        if self.terminal:
            return []
        with honest_role():
            if isinstance(msg, AbortMsg):
                self._finish(Decision.reject(Reason.ABORTED))
                return []
            handler = getattr(self, f"_on_{self.phase}_{type(msg).__name__}", None)
            try:
                if handler is None:
                    raise Violation(f"{type(msg).__name__} in phase {self.phase}")
                return handler(msg)
            except (Violation, PayloadError, ValueError):
                self._finish(Decision.reject(Reason.PROTOCOL_VIOLATION))
                return self._violation_reply()

    def abort(self):
        """Transport-level failure: terminal reject, keys untouched."""
        if not self.terminal:
            self._finish(Decision.reject(Reason.ABORTED))


class UserMachine(_Machine):
    def start(self) -> list:
        if self.phase is not None:
            raise RuntimeError("session already started")
        with honest_role():
            return self._start()

    def _violation_reply(self) -> list:
        return [AbortMsg(Reason.PROTOCOL_VIOLATION)]

    def _start(self) -> list:
        p, rng = self.params, self.rng
        self.x = rng.integers(0, 2, p.n, dtype=np.uint8)
        self.theta = rng.integers(0, 2, p.n, dtype=np.uint8)
        batch = self.channel.prepare(self.x, self.theta)
        self.f = UhfF.random(p.n, p.ell, rng)
        self.i_w = p.basis_code.info_set(self.theta, self.keys.w)
        self.y = self.x[self.i_w]
        if not p.mode.reconciles:
            self.phase = "await_g"
            return [QubitsMsg(batch), ThetaF(self.theta, self.f.key_bits)]
        fam = p.syndrome_family
        self.j = fam.sample_index(rng)
        self.s = fam.syndrome_bits(self.j, self.y)
        self.ext = None
        ext_bits = np.zeros(0, np.uint8)
        if p.mode is Mode.QKD:
            self.ext = UhfF.random(p.n, p.sk_len, rng)
            ext_bits = self.ext.key_bits
        self.phase = "await_g" if p.mode is Mode.QID_NOISY else "await_tg"
        return [QubitsMsg(batch), ThetaJSF(self.theta, self.j, self.s, self.f.key_bits, ext_bits)]

    def _g_from(self, bits) -> UhfG:
        p = self.params
        return UhfG.from_key_bits(_check_bits(bits, p.g_key_bits, "g key"), p.m, p.ell)

    def _on_await_g_GMsg(self, msg):
        p = self.params
        self.g = self._g_from(msg.g_key)
        self.z = self.f(self.y) ^ self.g(self.keys.w)
        sent = self.z
        if p.mode is Mode.MUTUAL:
            self.flips = (self.rng.random(p.ell) < p.flip_prob).astype(np.uint8)
            sent = self.z ^ self.flips
        self.phase = "await_decision"
        return [ZMsg(sent)]

    def _on_await_tg_TG(self, msg):
        p = self.params
        t_mask = _check_bits(msg.t_mask, p.n, "T")
        if int(t_mask.sum()) != p.ell:
            raise Violation("T must have exactly l elements")
        self.g = self._g_from(msg.g_key)
        t_idx = np.flatnonzero(t_mask)
        test = self.x[t_idx]
        self.z = self.f(self.y) ^ self.g(self.keys.w)
        ext_bits = self.ext.key_bits if self.ext is not None else None
        msg_bits = mac_message(self.theta, self.j, self.s, self.f.key_bits, self.g.key_bits,
                               t_mask, test, self.z, self.y, ext_bits)
        tag = mac_tag(self.keys.mac_key, msg_bits)
        self.phase = "await_decision"
        return [TestZTag(test, self.z, tag)]

    def _on_await_decision_DecisionMsg(self, msg):
        p = self.params
        self.server_decision = msg.decision
        if not msg.decision.accept:
            self._finish(msg.decision)
            return []
        if p.mode is Mode.MUTUAL:
            if sorted(msg.flips) == np.flatnonzero(self.flips).tolist():
                self._finish(Decision.ok())
            else:
                self._finish(Decision.reject(Reason.Z_MISMATCH))
            return []
        if p.mode is Mode.QKD:
            self.phase = "await_otp"
            return []
        if msg.flips:
            raise Violation("unexpected flip set")
        self._finish(msg.decision)
        return []

    def _on_await_otp_OtpW(self, msg):
        p = self.params
        c = _check_bits(msg.c, p.w_bits, "encrypted w")
        full = self.ext(self.y)
        if bits_to_int(c ^ full[:p.w_bits]) == self.keys.w - 1:
            self.sk = full[p.w_bits:]
            self._finish(Decision.ok())
        else:
            # confirmation pad mismatch: treat like a failed value comparison
            self._finish(Decision.reject(Reason.Z_MISMATCH))
        return []


class ServerMachine(_Machine):
    def __init__(self, *args, **kw):
        super().__init__(*args, **kw)
        self.phase = "await_qubits"
        # instrumentation for audits; never read by the protocol logic
        self.observed: dict = {}

    def _violation_reply(self) -> list:
        return [DecisionMsg(Decision.reject(Reason.PROTOCOL_VIOLATION))]

    def _decide(self, decision: Decision, flips=()) -> list:
        self._finish(decision)
        return [DecisionMsg(decision, tuple(flips))]

    def _on_await_qubits_QubitsMsg(self, msg):
        p, rng = self.params, self.rng
        if msg.batch.n != p.n:
            raise Violation("wrong number of qubits")
        self.c = p.basis_code.encode(self.keys.w).copy()
        if p.mode.authenticated:
            self.t_idx = np.sort(rng.permutation(p.n)[:p.ell])
            self.c[self.t_idx] = rng.integers(0, 2, p.ell, dtype=np.uint8)
        self.x_prime = self.channel.measure(msg.batch, self.c)
        if p.mode.authenticated:
            self.test_prime = self.x_prime[self.t_idx]
        self.phase = "await_theta"
        return []

    def _read_theta(self, theta, f_key):
        p = self.params
        self.theta = _check_bits(theta, p.n, "theta")
        self.f_key = _check_bits(f_key, p.f_key_bits, "f key")
        self.f = UhfF.from_key_bits(self.f_key, p.ell, p.n)
        self.i_w = p.basis_code.info_set(self.theta, self.keys.w)
        self.g = UhfG.random(p.m, p.ell, self.rng)

    def _on_await_theta_ThetaF(self, msg):
        if self.params.mode.reconciles:
            raise Violation("this mode expects THETA_J_S_F")
        self._read_theta(msg.theta, msg.f_key)
        self.phase = "await_z"
        return [GMsg(self.g.key_bits)]

    def _on_await_theta_ThetaJSF(self, msg):
        p = self.params
        if not p.mode.reconciles:
            raise Violation("this mode expects THETA_F")
        self._read_theta(msg.theta, msg.f_key)
        self.j = int(msg.j)
        self.s = _check_bits(msg.s, msg.s.size, "syndrome")
        if self.s.size > p.max_syndrome_bits:
            raise Violation("syndrome too long")
        self.ext_key = _check_bits(msg.ext_key, p.ext_key_bits, "extraction key")
        if p.mode is Mode.QID_NOISY:
            self.phase = "await_z"
            return [GMsg(self.g.key_bits)]
        mask = np.zeros(p.n, np.uint8)
        mask[self.t_idx] = 1
        self.t_mask = mask
        self.phase = "await_test"
        return [TG(mask, self.g.key_bits)]

    def _z_prime(self, y) -> np.ndarray:
        return self.f(y) ^ self.g(self.keys.w)

    def _on_await_z_ZMsg(self, msg):
        p = self.params
        z = _check_bits(msg.z, p.ell, "z")
        y = self.x_prime[self.i_w]
        if p.mode is Mode.QID_NOISY:
            y = p.syndrome_family.decode(self.j, y, self.s)
            if y is None:
                return self._decide(Decision.reject(Reason.DECODE_FAIL))
        z_prime = self._z_prime(y)
        self.observed["z_prime"] = z_prime
        if p.mode is Mode.MUTUAL:
            diff = z ^ z_prime
            if diff.sum() <= p.closeness_threshold * p.ell:
                return self._decide(Decision.ok(), np.flatnonzero(diff).tolist())
            return self._decide(Decision.reject(Reason.Z_MISMATCH))
        if np.array_equal(z, z_prime):
            return self._decide(Decision.ok())
        return self._decide(Decision.reject(Reason.Z_MISMATCH))

    def recover(self, test) -> np.ndarray | None:
        """x|_{I_w} from x'|_{I_w}, test and the syndrome; None on decode failure."""
        p = self.params
        y_noisy = qidplus_recover_input(self.x_prime, test, self.t_idx, self.c,
                                        p.basis_code.encode(self.keys.w), self.i_w)
        return p.syndrome_family.decode(self.j, y_noisy, self.s)

    def _on_await_test_TestZTag(self, msg):
        p = self.params
        test = _check_bits(msg.test, p.ell, "test")
        z = _check_bits(msg.z, p.ell, "z")
        tag = _check_bits(msg.tag, p.ell, "tag")
        y = self.recover(test)
        if y is None:
            return self._decide(Decision.reject(Reason.DECODE_FAIL))
        ext = self.ext_key if p.mode is Mode.QKD else None
        msg_bits = mac_message(self.theta, self.j, self.s, self.f_key, self.g.key_bits,
                               self.t_mask, test, z, y, ext)
        if not mac_verify(self.keys.mac_key, msg_bits, tag):
            return self._decide(Decision.reject(Reason.MAC_FAIL))
        v = self.theta[self.t_idx] == self.c[self.t_idx]
        errors = int(np.count_nonzero(test[v] != self.test_prime[v]))
        self.observed["spot_check"] = (errors, int(v.sum()))
        if not spot_check_passes(errors, int(v.sum()), p):
            return self._decide(Decision.reject(Reason.TEST_MISMATCH))
        if not np.array_equal(z, self._z_prime(y)):
            return self._decide(Decision.reject(Reason.Z_MISMATCH))
        out = self._decide(Decision.ok())
        if p.mode is Mode.QKD:
            ext = UhfF.from_key_bits(self.ext_key, p.sk_len, p.n)
            full = ext(y)
            self.sk = full[p.w_bits:]
            pad = full[:p.w_bits]
            out.append(OtpW(int_to_bits(self.keys.w - 1, p.w_bits) ^ pad))
        return out


def qidplus_recover_input(x_prime, test, t_idx, c, codeword, i_w) -> np.ndarray:
    """x'|_{I_w} with the wrong-basis positions inside T replaced from test."""
    fixed = np.asarray(x_prime, np.uint8).copy()
    t_idx = np.asarray(t_idx)
    wrong = c[t_idx] != codeword[t_idx]
    fixed[t_idx[wrong]] = np.asarray(test, np.uint8)[wrong]
    return fixed[i_w]


def qidplus_recover(x_prime_iw, test, t_idx, theta, c, codeword, s, j, family):
    """Standalone recovery: positions of I_w inside T where the server measured
    in the wrong basis are overwritten from test, then the result is decoded
    against the syndrome.  Returns None on failure.

    ``x_prime_iw`` is the server's raw x'|_{I_w}; ``codeword`` is c(w).
    """
    theta = np.asarray(theta, np.uint8)
    i_w = np.flatnonzero(theta == codeword)
    full = np.zeros(theta.size, np.uint8)
    full[i_w] = x_prime_iw
    y_noisy = qidplus_recover_input(full, test, t_idx, np.asarray(c, np.uint8), codeword, i_w)
    return family.decode(j, y_noisy, s)


# state-transition entry points, one per mode family
def user_next(machine: UserMachine, incoming=None) -> list:
    """Start the user (incoming None) or feed it one message."""
    return machine.start() if incoming is None else machine.handle(incoming)


def server_next(machine: ServerMachine, incoming) -> list:
    return machine.handle(incoming)


qid_user_next = qidplus_user_next = user_next
qid_server_next = qidplus_server_next = server_next
