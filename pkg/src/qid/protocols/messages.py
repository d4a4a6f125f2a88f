"""Protocol messages and their canonical payload encoding.

Every classical payload is the length-prefixed field encoding from
``qid.hashing`` packed into bytes (final byte zero padded).  The QUBITS
payload instead packs (bit, basis, multipulse) per position: it carries the
hidden simulation state in the clear and is only meaningful inside the
simulator.
"""

from __future__ import annotations

import enum
import hashlib
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from ..gf2 import bits_to_int, int_to_bits
from ..hashing import bits_to_bytes, bytes_to_bits, decode_fields, encode_fields

J_BITS = 64
REASON_BITS = 8
INDEX_BITS = 32


class FrameType(enum.IntEnum):
    QUBITS = 1
    THETA_F = 2
    G = 3
    Z = 4
    THETA_J_S_F = 5
    T_G = 6
    TEST_Z_TAG = 7
    DECISION = 8
    OTP_W = 9
    ABORT = 10


class Reason(enum.IntEnum):
    OK = 0
    MAC_FAIL = 1
    TEST_MISMATCH = 2
    Z_MISMATCH = 3
    DECODE_FAIL = 4
    PROTOCOL_VIOLATION = 5
    ABORTED = 6


@dataclass(frozen=True)
class Decision:
    accept: bool
    reason: Reason

    def __post_init__(self):
        if self.accept != (self.reason is Reason.OK):
            raise ValueError("reason OK if and only if accepted")

    @classmethod
    def ok(cls) -> "Decision":
        return cls(True, Reason.OK)

    @classmethod
    def reject(cls, reason: Reason) -> "Decision":
        return cls(False, Reason(reason))

    def __str__(self) -> str:
        return ("accept" if self.accept else "reject") + f" ({self.reason.name})"


class PayloadError(ValueError):
    pass


def _bits(a) -> np.ndarray:
    return np.asarray(a, dtype=np.uint8)


# --------------------------------------------------------------------------
# messages

@dataclass(eq=False)
class QubitsMsg:
    batch: object  # qchannel.QubitBatch
    kind = FrameType.QUBITS


@dataclass(eq=False)
class ThetaF:
    theta: np.ndarray
    f_key: np.ndarray
    kind = FrameType.THETA_F

    def fields(self):
        return [self.theta, self.f_key]


@dataclass(eq=False)
class ThetaJSF:
    theta: np.ndarray
    j: int
    s: np.ndarray
    f_key: np.ndarray
    ext_key: np.ndarray = field(default_factory=lambda: np.zeros(0, np.uint8))
    kind = FrameType.THETA_J_S_F

    def fields(self):
        return [self.theta, int_to_bits(self.j, J_BITS), self.s, self.f_key, self.ext_key]


@dataclass(eq=False)
class GMsg:
    g_key: np.ndarray
    kind = FrameType.G

    def fields(self):
        return [self.g_key]


@dataclass(eq=False)
class ZMsg:
    z: np.ndarray
    kind = FrameType.Z

    def fields(self):
        return [self.z]


@dataclass(eq=False)
class TG:
    t_mask: np.ndarray
    g_key: np.ndarray
    kind = FrameType.T_G

    def fields(self):
        return [self.t_mask, self.g_key]


@dataclass(eq=False)
class TestZTag:
    test: np.ndarray
    z: np.ndarray
    tag: np.ndarray
    kind = FrameType.TEST_Z_TAG
    __test__ = False

    def fields(self):
        return [self.test, self.z, self.tag]


@dataclass(eq=False)
class DecisionMsg:
    decision: Decision
    flips: tuple = ()
    kind = FrameType.DECISION

    def fields(self):
        idx = [int_to_bits(i, INDEX_BITS) for i in self.flips]
        flat = np.concatenate(idx) if idx else np.zeros(0, np.uint8)
        return [np.array([int(self.decision.accept)], np.uint8),
                int_to_bits(int(self.decision.reason), REASON_BITS), flat]


@dataclass(eq=False)
class OtpW:
    c: np.ndarray
    kind = FrameType.OTP_W

    def fields(self):
        return [self.c]


@dataclass(eq=False)
class AbortMsg:
    reason: Reason = Reason.ABORTED
    kind = FrameType.ABORT

    def fields(self):
        return [int_to_bits(int(self.reason), REASON_BITS)]


Message = Union[QubitsMsg, ThetaF, ThetaJSF, GMsg, ZMsg, TG, TestZTag, DecisionMsg, OtpW, AbortMsg]


# --------------------------------------------------------------------------
# payload codec

def qubit_payload(bits, bases, flags) -> bytes:
    triples = np.stack([_bits(bits), _bits(bases), _bits(flags)], axis=1).ravel()
    return bits_to_bytes(triples)


def parse_qubit_payload(payload: bytes, n: int):
    if len(payload) != (3 * n + 7) // 8:
        raise PayloadError(f"QUBITS payload of {len(payload)} bytes does not hold {n} qubits")
    triples = bytes_to_bits(payload)
    if triples[3 * n:].any():
        raise PayloadError("nonzero padding in QUBITS payload")
    t = triples[:3 * n].reshape(n, 3)
    return t[:, 0].copy(), t[:, 1].copy(), t[:, 2].copy()


def encode_payload(msg) -> bytes:
    if isinstance(msg, QubitsMsg):
        return qubit_payload(*msg.batch.wire_fields())
    return bits_to_bytes(encode_fields(msg.fields()))


def _parse_fields(payload: bytes) -> list[np.ndarray]:
    bits = bytes_to_bits(payload)
    # strip the byte padding: a well-formed payload ends after its last field
    out, pos = [], 0
    while pos < bits.size:
        if bits.size - pos < 8 and not bits[pos:].any():
            break
        if pos + 32 > bits.size:
            raise PayloadError("truncated length prefix")
        n = bits_to_int(bits[pos:pos + 32])
        pos += 32
        if pos + n > bits.size:
            raise PayloadError("field runs past end of payload")
        out.append(bits[pos:pos + n].copy())
        pos += n
    if bits_to_bytes(encode_fields(out)) != payload:
        raise PayloadError("non-canonical payload")
    return out


_ARITY = {FrameType.THETA_F: 2, FrameType.THETA_J_S_F: 5, FrameType.G: 1, FrameType.Z: 1,
          FrameType.T_G: 2, FrameType.TEST_Z_TAG: 3, FrameType.DECISION: 3,
          FrameType.OTP_W: 1, FrameType.ABORT: 1}


def decode_payload(kind: FrameType, payload: bytes):
    """Classical message from payload bytes (QUBITS needs the channel; see wire)."""
    kind = FrameType(kind)
    if kind is FrameType.QUBITS:
        raise PayloadError("QUBITS payloads are decoded by the receiving channel")
    try:
        parts = _parse_fields(payload)
    except ValueError as exc:
        raise PayloadError(str(exc)) from exc
    if len(parts) != _ARITY[kind]:
        raise PayloadError(f"{kind.name} expects {_ARITY[kind]} fields, got {len(parts)}")
    try:
        if kind is FrameType.THETA_F:
            return ThetaF(*parts)
        if kind is FrameType.THETA_J_S_F:
            if parts[1].size != J_BITS:
                raise PayloadError("j must be 64 bits")
            return ThetaJSF(parts[0], bits_to_int(parts[1]), parts[2], parts[3], parts[4])
        if kind is FrameType.G:
            return GMsg(parts[0])
        if kind is FrameType.Z:
            return ZMsg(parts[0])
        if kind is FrameType.T_G:
            return TG(*parts)
        if kind is FrameType.TEST_Z_TAG:
            return TestZTag(*parts)
        if kind is FrameType.OTP_W:
            return OtpW(parts[0])
        if kind is FrameType.ABORT:
            if parts[0].size != REASON_BITS:
                raise PayloadError("bad abort reason")
            return AbortMsg(Reason(bits_to_int(parts[0])))
        # DECISION
        verdict, reason, flat = parts
        if verdict.size != 1 or reason.size != REASON_BITS or flat.size % INDEX_BITS:
            raise PayloadError("malformed decision")
        flips = tuple(bits_to_int(flat[i:i + INDEX_BITS]) for i in range(0, flat.size, INDEX_BITS))
        return DecisionMsg(Decision(bool(verdict[0]), Reason(bits_to_int(reason))), flips)
    except (ValueError, KeyError) as exc:
        if isinstance(exc, PayloadError):
            raise
        raise PayloadError(str(exc)) from exc


def payload_digest(msg) -> str:
    return hashlib.sha256(encode_payload(msg)).hexdigest()[:16]
