"""Simulated BB84 prepare-and-measure channel.

Every state and measurement used by the honest roles and by the implemented
attacks lies in the {+, x} product family, so a qubit is simulated exactly by
a classical record (bit, basis, multipulse flag).  Measuring in the encoding
basis returns the bit; measuring in the other basis returns a fresh uniform
bit.  Entangled or coherent attacks are not representable.

Noise is drawn when a batch is transmitted but only applied at the first
measurement whose basis matches the encoding at that time, so intercepting
and resending composes in physical order.

Randomness comes from two streams: the *source* stream (multipulse flags,
used where the qubits are prepared) and the *medium* stream (noise flags and
the outcomes of mismatched measurements, used where qubits are received).
Splitting them lets a networked run reproduce an in-memory run exactly.
"""

from __future__ import annotations

import contextlib
import contextvars
import enum
import hashlib
import json
from dataclasses import dataclass

import numpy as np

_HONEST = contextvars.ContextVar("qid_honest_role", default=False)


@contextlib.contextmanager
def honest_role():
    """Mark the enclosed code as an honest protocol role; tap calls then fail."""
    token = _HONEST.set(True)
    try:
        yield
    finally:
        _HONEST.reset(token)


class TapViolation(RuntimeError):
    """An honest role tried to use an adversary tap operation."""


class ChannelError(RuntimeError):
    pass


def _forbid_honest(op: str):
    if _HONEST.get():
        raise TapViolation(f"honest role called tap operation {op}")


@dataclass(frozen=True)
class ChannelConfig:
    phi: float = 0.0
    eta: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not 0 <= self.phi < 1:
            raise ValueError("phi must lie in [0, 1)")
        if not 0 <= self.eta <= 1:
            raise ValueError("eta must lie in [0, 1]")


class BatchState(enum.Enum):
    PREPARED = "prepared"
    IN_FLIGHT = "in_flight"
    DELIVERED = "delivered"
    CONSUMED = "consumed"


class QubitBatch:
    """n simulated qubits.  Hidden fields are private to this module."""

    def __init__(self, bits, bases, multipulse, channel: "Channel", noise=None):
        self._bits = np.asarray(bits, dtype=np.uint8).copy()
        self._bases = np.asarray(bases, dtype=np.uint8).copy()
        self._multipulse = np.asarray(multipulse, dtype=bool).copy()
        self._noise = np.zeros(self._bits.size, bool) if noise is None else np.asarray(noise, bool).copy()
        self._channel = channel
        self.state = BatchState.PREPARED

    @property
    def n(self) -> int:
        return self._bits.size

    def __len__(self) -> int:
        return self.n

    # simulation-trust export for the wire codec only
    def wire_fields(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return self._bits.copy(), self._bases.copy(), self._multipulse.astype(np.uint8)

    def digest(self) -> str:
        h = hashlib.sha256()
        for arr in (self._bits, self._bases, self._multipulse.astype(np.uint8)):
            h.update(np.packbits(arr).tobytes())
        return h.hexdigest()[:16]


@dataclass
class TapHandle:
    """Adversary access to one batch while it is in flight."""

    batch: QubitBatch
    channel: "Channel"
    log: list


class Channel:
    """One session's quantum link.  ``tap`` (if set) is called with a
    TapHandle between transmission and delivery."""

    def __init__(self, config: ChannelConfig = ChannelConfig(), source_rng=None,
                 medium_rng=None, tap=None):
        self.config = config
        if source_rng is None or medium_rng is None:
            src, med = np.random.SeedSequence(config.seed).spawn(2)
            source_rng = source_rng or np.random.default_rng(src)
            medium_rng = medium_rng or np.random.default_rng(med)
        self.source_rng = source_rng
        self.medium_rng = medium_rng
        self.tap = tap
        self.events: list[dict] = []

    # -- logging -----------------------------------------------------------

    def _log(self, event: str, public: dict, hidden: dict | None = None):
        self.events.append({"event": event, **public, "hidden": hidden or {}})

    def transcript_lines(self, reveal: bool = False) -> list[str]:
        out = []
        for ev in self.events:
            rec = {k: v for k, v in ev.items() if k != "hidden"}
            if ev["hidden"]:
                rec["hidden"] = ev["hidden"] if reveal else "redacted"
            out.append(json.dumps(rec, sort_keys=True))
        return out

    # -- honest operations -------------------------------------------------

    def prepare(self, x, theta) -> QubitBatch:
        x = np.asarray(x, dtype=np.uint8)
        theta = np.asarray(theta, dtype=np.uint8)
        if x.shape != theta.shape or x.ndim != 1:
            raise ValueError("x and theta must be equal-length bit strings")
        flags = self.source_rng.random(x.size) < self.config.eta
        batch = QubitBatch(x, theta, flags, self)
        self._log("prepare", {"n": int(x.size), "multipulse": int(flags.sum())},
                  {"x": _s(x), "theta": _s(theta), "flags": _s(flags)})
        return batch

    def transmit(self, batch: QubitBatch) -> QubitBatch:
        if batch.state is not BatchState.PREPARED:
            raise ChannelError("batch already transmitted")
        noise = self.medium_rng.random(batch.n) < self.config.phi
        batch._noise = noise
        batch.state = BatchState.IN_FLIGHT
        self._log("transmit", {"n": batch.n}, {"noise": _s(noise)})
        if self.tap is not None:
            handle = TapHandle(batch, self, [])
            self.tap(handle)
            batch = handle.batch
        batch.state = BatchState.DELIVERED
        self._log("deliver", {"n": batch.n})
        return batch

    def deliver_external(self, bits, bases, multipulse) -> QubitBatch:
        """Receive a batch that arrived over the wire and transmit it locally."""
        batch = QubitBatch(bits, bases, multipulse, self)
        return self.transmit(batch)

    def measure(self, batch: QubitBatch, bases) -> np.ndarray:
        if batch.state is not BatchState.DELIVERED:
            raise ChannelError(f"cannot measure a batch in state {batch.state.value}")
        out = self._measure_positions(batch, np.asarray(bases, np.uint8), np.arange(batch.n))
        batch.state = BatchState.CONSUMED
        self._log("measure", {"n": batch.n}, {"bases": _s(bases), "outcome": _s(out)})
        return out

    def _measure_positions(self, batch, bases, positions) -> np.ndarray:
        if bases.size != positions.size:
            raise ValueError("one basis per measured position")
        fresh = self.medium_rng.integers(0, 2, positions.size, dtype=np.uint8)
        match = batch._bases[positions] == bases
        out = np.where(match, batch._bits[positions] ^ batch._noise[positions], fresh)
        # noise is spent by the first matching measurement only
        spent = batch._noise.copy()
        spent[positions[match]] = False
        batch._noise = spent
        return out.astype(np.uint8)

    # -- tap operations ----------------------------------------------------

    def intercept_resend(self, tap: TapHandle, bases, positions=None):
        """Measure chosen positions in ``bases`` and resend them re-prepared.

        Returns (observed bits at ``positions``, resent batch).  Untouched
        positions pass through with their pending noise.
        """
        _forbid_honest("intercept_resend")
        old = tap.batch
        if old.state is not BatchState.IN_FLIGHT:
            raise ChannelError("tap after delivery")
        positions = np.arange(old.n) if positions is None else np.asarray(positions, dtype=np.int64)
        bases = np.asarray(bases, dtype=np.uint8)
        observed = self._measure_positions(old, bases, positions)
        bits, basis, flags = old._bits.copy(), old._bases.copy(), old._multipulse.copy()
        noise = old._noise.copy()
        bits[positions] = observed
        basis[positions] = bases
        flags[positions] = False
        old.state = BatchState.CONSUMED
        new = QubitBatch(bits, basis, flags, self, noise)
        new.state = BatchState.IN_FLIGHT
        tap.batch = new
        entry = {"op": "intercept_resend", "positions": positions.tolist()}
        tap.log.append(entry)
        self._log("intercept", {"count": int(positions.size)},
                  {"positions": positions.tolist(), "bases": _s(bases), "observed": _s(observed)})
        return observed, new

    def leak_multipulse(self, tap: TapHandle) -> list[tuple[int, int, int]]:
        """(i, x_i, theta_i) for every multipulse-flagged position."""
        _forbid_honest("leak_multipulse")
        b = tap.batch
        if b.state not in (BatchState.IN_FLIGHT, BatchState.DELIVERED):
            raise ChannelError("batch not in flight")
        idx = np.flatnonzero(b._multipulse)
        leaked = [(int(i), int(b._bits[i]), int(b._bases[i])) for i in idx]
        tap.log.append({"op": "leak_multipulse", "positions": idx.tolist()})
        self._log("leak", {"count": len(leaked)}, {"leaked": leaked})
        return leaked


def _s(arr) -> str:
    return "".join(str(int(v)) for v in np.asarray(arr).ravel())


def prepare(channel: Channel, x, theta) -> QubitBatch:
    return channel.prepare(x, theta)


def transmit(channel: Channel, batch: QubitBatch) -> QubitBatch:
    return channel.transmit(batch)


def measure(batch: QubitBatch, bases) -> np.ndarray:
    return batch._channel.measure(batch, bases)


def intercept_resend(tap: TapHandle, bases, positions=None):
    return tap.channel.intercept_resend(tap, bases, positions)


def leak_multipulse(tap: TapHandle):
    return tap.channel.leak_multipulse(tap)
