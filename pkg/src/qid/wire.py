"""Byte-exact frame codec.

Frame layout: magic b"QI" (0x51 0x49), version (1 byte), frame type
(1 byte), payload length (4 bytes, big-endian), payload.  Decoding never
returns a partially parsed frame: every malformed input raises a
``WireError`` subclass.

The QUBITS payload packs (bit, basis, multipulse flag) per simulated qubit.
It is simulation state sent in the clear and only makes sense between two
cooperating simulator processes.
"""

from __future__ import annotations

import socket
import struct
from dataclasses import dataclass

import numpy as np

from .protocols.messages import (FrameType, PayloadError, QubitsMsg, decode_payload, encode_payload,
                                 parse_qubit_payload, qubit_payload)

MAGIC = b"QI"
VERSION = 1
HEADER = struct.Struct(">2sBBI")
MAX_PAYLOAD = 1 << 24


class WireError(ValueError):
    """Malformed frame bytes."""


class TruncatedFrame(WireError):
    pass


class BadMagic(WireError):
    pass


class BadVersion(WireError):
    pass


class UnknownFrameType(WireError):
    pass


class OversizeFrame(WireError):
    pass


class TransportError(ConnectionError):
    """Peer closed the connection or a read timed out."""


@dataclass(frozen=True)
class Frame:
    kind: FrameType
    payload: bytes
    version: int = VERSION

    def __post_init__(self):
        object.__setattr__(self, "kind", FrameType(self.kind))
        object.__setattr__(self, "payload", bytes(self.payload))
        if len(self.payload) > MAX_PAYLOAD:
            raise OversizeFrame(f"payload of {len(self.payload)} bytes exceeds 2^24")


def encode_frame(frame: Frame) -> bytes:
    return HEADER.pack(MAGIC, frame.version, int(frame.kind), len(frame.payload)) + frame.payload


def parse_header(header: bytes) -> tuple[FrameType, int]:
    """Validate an 8-byte header; returns (frame type, payload length)."""
    if len(header) < 2:
        raise TruncatedFrame("missing magic")
    if header[:2] != MAGIC:
        raise BadMagic(f"bad magic {header[:2].hex()}")
    if len(header) < HEADER.size:
        raise TruncatedFrame("truncated header")
    _, version, kind, length = HEADER.unpack(header[:HEADER.size])
    if version != VERSION:
        raise BadVersion(f"unsupported version {version}")
    try:
        kind = FrameType(kind)
    except ValueError:
        raise UnknownFrameType(f"unknown frame type {kind}") from None
    if length > MAX_PAYLOAD:
        raise OversizeFrame(f"declared payload of {length} bytes exceeds 2^24")
    return kind, length


def read_frame(data: bytes) -> tuple[Frame, int]:
    """First frame of ``data`` and the number of bytes it occupies."""
    kind, length = parse_header(data[:HEADER.size])
    end = HEADER.size + length
    if len(data) < end:
        raise TruncatedFrame(f"payload needs {length} bytes, {len(data) - HEADER.size} present")
    return Frame(kind, data[HEADER.size:end]), end


def decode_frame(data: bytes) -> Frame:
    """Exactly one frame; trailing bytes are an error."""
    frame, used = read_frame(data)
    if used != len(data):
        raise WireError(f"{len(data) - used} trailing bytes after frame")
    return frame


# --------------------------------------------------------------------------
# frames <-> protocol messages

@dataclass(frozen=True)
class QubitPayload:
    """Parsed QUBITS payload: (bit, basis, multipulse) per position."""

    bits: np.ndarray
    bases: np.ndarray
    flags: np.ndarray

    def to_bytes(self) -> bytes:
        return qubit_payload(self.bits, self.bases, self.flags)


def message_frame(msg) -> Frame:
    return Frame(msg.kind, encode_payload(msg))


def frame_message(frame: Frame, n: int | None = None):
    """Protocol message of a classical frame, or a QubitPayload for QUBITS (needs n)."""
    try:
        if frame.kind is FrameType.QUBITS:
            if n is None:
                raise WireError("QUBITS frames need the session's n")
            return QubitPayload(*parse_qubit_payload(frame.payload, n))
        return decode_payload(frame.kind, frame.payload)
    except PayloadError as exc:
        raise WireError(str(exc)) from exc


def deliver_qubits(channel, payload: QubitPayload) -> QubitsMsg:
    """Hand a received batch to the local channel (noise and taps apply there)."""
    return QubitsMsg(channel.deliver_external(payload.bits, payload.bases, payload.flags))


# --------------------------------------------------------------------------
# socket framing

def _recv_exact(sock: socket.socket, size: int) -> bytes:
    chunks, got = [], 0
    while got < size:
        try:
            chunk = sock.recv(size - got)
        except socket.timeout as exc:
            raise TransportError("read timed out") from exc
        except OSError as exc:
            raise TransportError(str(exc)) from exc
        if not chunk:
            raise TransportError("connection closed")
        chunks.append(chunk)
        got += len(chunk)
    return b"".join(chunks)


def recv_frame(sock: socket.socket) -> Frame:
    """Read one frame; a bad magic is reported after reading only two bytes."""
    probe = _recv_exact(sock, 2)
    if probe != MAGIC:
        raise BadMagic(f"bad magic {probe.hex()}")
    kind, length = parse_header(probe + _recv_exact(sock, HEADER.size - 2))
    return Frame(kind, _recv_exact(sock, length) if length else b"")


def send_frame(sock: socket.socket, frame: Frame) -> None:
    try:
        sock.sendall(encode_frame(frame))
    except OSError as exc:
        raise TransportError(str(exc)) from exc
