"""Attack specifications and the link/tap hooks that implement them.

Attacks only touch qubits through the channel tap API and only touch
classical traffic through the session's link hook.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from ..hashing import bits_to_bytes, encode_fields
from ..protocols.messages import FrameType, QubitsMsg, decode_payload
from ..protocols.params import SessionParams
from ..protocols.runner import S2U, U2S
from ..qchannel import intercept_resend


class Strategy(str, enum.Enum):
    HONEST = "honest"
    GUESS_USER = "guess_user"
    GUESS_SERVER = "guess_server"
    INTERCEPT_RESEND = "intercept_resend"
    BLOCK_ABORT = "block_abort"
    REPLAY = "replay"
    BITFLIP = "bitflip"


class BasesRule(str, enum.Enum):
    RANDOM = "random"
    PLUS = "plus"
    CROSS = "cross"


@dataclass(frozen=True)
class AttackSpec:
    """One attack strategy and its parameters.

    Parameters
    ----------
    strategy : Strategy
    w_guess : int, optional
        Guessed password for GUESS_USER / GUESS_SERVER.  ``None`` draws a
        uniformly random wrong guess each trial.
    force_correct : bool
        Test-harness switch: the guess equals the true password.
    positions : tuple of int, optional
        Qubit positions touched by INTERCEPT_RESEND (``None`` = all).
    bases : BasesRule
        Measurement bases used by INTERCEPT_RESEND.
    frame : FrameType, optional
        Target frame of BLOCK_ABORT and BITFLIP.
    bit : int
        Payload bit flipped by BITFLIP, counted over the concatenated fields.
    trials, seed : int
    """

    strategy: Strategy = Strategy.HONEST
    w_guess: int | None = None
    force_correct: bool = False
    positions: tuple | None = None
    bases: BasesRule = BasesRule.RANDOM
    frame: FrameType | None = None
    bit: int = 0
    trials: int = 1000
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "strategy", Strategy(self.strategy))
        object.__setattr__(self, "bases", BasesRule(self.bases))
        if self.frame is not None:
            object.__setattr__(self, "frame", FrameType(self.frame))
        if self.positions is not None:
            object.__setattr__(self, "positions", tuple(int(i) for i in self.positions))
        if self.strategy in (Strategy.BLOCK_ABORT, Strategy.BITFLIP) and self.frame is None:
            raise ValueError(f"{self.strategy.value} needs a target frame")
        if self.strategy is Strategy.BITFLIP and self.frame is FrameType.QUBITS:
            raise ValueError("qubits are attacked through the tap, not by bit flips")
        if self.trials < 0 or self.bit < 0:
            raise ValueError("trials and bit index must be nonnegative")

    def validate(self, params: SessionParams) -> "AttackSpec":
        if self.w_guess is not None and not 1 <= self.w_guess <= params.m:
            raise ValueError(f"guess {self.w_guess} outside 1..{params.m}")
        if self.positions is not None and any(not 0 <= i < params.n for i in self.positions):
            raise ValueError("intercept position outside the qubit string")
        return self

    def trial_rng(self, trial: int, stream: int = 0) -> np.random.Generator:
        """Counter-based per-trial generator: independent of execution order."""
        return np.random.default_rng(np.random.SeedSequence(self.seed, spawn_key=(trial, stream)))


# --------------------------------------------------------------------------
# quantum tap

def intercept_tap(spec: AttackSpec, rng: np.random.Generator, record: dict | None = None):
    """Tap that measures chosen positions in the rule's bases and resends."""
    def tap(handle):
        n = handle.batch.n
        pos = np.arange(n) if spec.positions is None else np.asarray(spec.positions, np.int64)
        if spec.bases is BasesRule.RANDOM:
            bases = rng.integers(0, 2, pos.size, dtype=np.uint8)
        else:
            bases = np.full(pos.size, 0 if spec.bases is BasesRule.PLUS else 1, np.uint8)
        observed, _ = intercept_resend(handle, bases, pos)
        if record is not None:
            record["positions"], record["bases"], record["observed"] = pos, bases, observed
    return tap


# --------------------------------------------------------------------------
# classical link

def flip_message_bit(msg, bit: int):
    """Copy of ``msg`` with one bit flipped, counted across its fields."""
    fields = [np.asarray(f, np.uint8).copy() for f in msg.fields()]
    total = sum(f.size for f in fields)
    if total == 0:
        return msg
    bit %= total
    for f in fields:
        if bit < f.size:
            f[bit] ^= 1
            break
        bit -= f.size
    return decode_payload(msg.kind, bits_to_bytes(encode_fields(fields)))


class Link:
    """Link hook recording what a man in the middle sees, optionally tampering."""

    def __init__(self, spec: AttackSpec | None = None):
        self.spec = spec
        self.seen: list = []

    def __call__(self, direction, msg):
        self.seen.append((direction, msg))
        spec = self.spec
        if spec is None or spec.frame is None or msg.kind is not spec.frame:
            return [msg]
        if spec.strategy is Strategy.BLOCK_ABORT:
            return []
        if spec.strategy is Strategy.BITFLIP and not isinstance(msg, QubitsMsg):
            return [flip_message_bit(msg, spec.bit)]
        return [msg]

    def first(self, kind: FrameType):
        for _, msg in self.seen:
            if msg.kind is kind:
                return msg
        return None


class ReplayUser:
    """A user impostor that replays the classical messages of a recorded session.

    Qubits cannot be copied, so it sends freshly prepared random qubits and
    then the recorded THETA_F / THETA_J_S_F and Z / TEST_Z_TAG messages.
    """

    def __init__(self, recorded, channel, rng):
        self.recorded = [msg for d, msg in recorded if d == U2S and not isinstance(msg, QubitsMsg)]
        self.channel = channel
        self.rng = rng

    def start(self, n: int) -> list:
        x = self.rng.integers(0, 2, n, dtype=np.uint8)
        theta = self.rng.integers(0, 2, n, dtype=np.uint8)
        return [QubitsMsg(self.channel.prepare(x, theta)), self.recorded[0]]

    def reply(self, msg) -> list:
        if msg.kind in (FrameType.G, FrameType.T_G) and len(self.recorded) > 1:
            return [self.recorded[1]]
        return []


__all__ = ["AttackSpec", "BasesRule", "Link", "ReplayUser", "Strategy", "flip_message_bit",
           "intercept_tap", "S2U", "U2S"]
