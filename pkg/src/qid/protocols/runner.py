"""In-memory session driver.

One session owns a user machine, a server machine and a quantum channel.
Messages are delivered in send order.  Two adversary hooks exist:

* ``tap(handle)`` on the quantum channel (see ``qid.qchannel``);
* ``link(direction, msg)`` on the classical link, returning the list of
  messages actually delivered (drop, modify, inject).

When the queue drains before both machines are terminal, the stalled
machines abort; that is the in-memory analogue of a phase timeout.
"""

from __future__ import annotations

import hashlib
import json
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from ..qchannel import Channel, ChannelConfig
from .machines import KeyStore, ServerMachine, UserMachine
from .messages import Decision, QubitsMsg, encode_payload
from .params import Mode, SessionParams

U2S, S2U = "U->S", "S->U"
STREAMS = ("user", "server", "source", "medium", "attacker")


def session_rngs(seed) -> dict[str, np.random.Generator]:
    """Independent generators for each party, derived from the session seed."""
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    return {name: np.random.default_rng(child) for name, child in zip(STREAMS, ss.spawn(len(STREAMS)))}


@dataclass
class Transcript:
    records: list = field(default_factory=list)
    channel_lines: list = field(default_factory=list)

    def add(self, direction: str, msg):
        payload = encode_payload(msg)
        self.records.append({"seq": len(self.records), "dir": direction, "frame": msg.kind.name,
                             "bytes": len(payload),
                             "digest": hashlib.sha256(payload).hexdigest()[:16]})

    def lines(self) -> list[str]:
        return [json.dumps(r, sort_keys=True) for r in self.records] + list(self.channel_lines)

    def frames(self) -> list[tuple[str, str, str]]:
        return [(r["dir"], r["frame"], r["digest"]) for r in self.records]

    def digest(self) -> str:
        return hashlib.sha256("\n".join(self.lines()).encode()).hexdigest()


@dataclass
class SessionResult:
    server: Decision
    user: Decision
    transcript: Transcript
    user_machine: UserMachine
    server_machine: ServerMachine

    @property
    def accepted(self) -> bool:
        return self.server.accept

    @property
    def sk_user(self):
        return self.user_machine.sk

    @property
    def sk_server(self):
        return self.server_machine.sk


def run_session(params: SessionParams, user_keys: KeyStore, server_keys: KeyStore | None = None,
                seed=0, phi: float = 0.0, eta: float = 0.0, tap=None, link=None,
                reveal: bool = False, rngs: dict | None = None) -> SessionResult:
    server_keys = user_keys if server_keys is None else server_keys
    rngs = rngs or session_rngs(seed)
    channel = Channel(ChannelConfig(phi, eta), rngs["source"], rngs["medium"], tap=tap)
    user = UserMachine(params, user_keys, rngs["user"], channel)
    server = ServerMachine(params, server_keys, rngs["server"], channel)
    transcript = Transcript()

    queue = deque((U2S, m) for m in user.start())
    while queue:
        direction, msg = queue.popleft()
        if isinstance(msg, QubitsMsg) and direction == U2S:
            msg = QubitsMsg(channel.transmit(msg.batch))
        delivered = [msg] if link is None else link(direction, msg)
        for d in delivered:
            transcript.add(direction, d)
            receiver, back = (server, S2U) if direction == U2S else (user, U2S)
            queue.extend((back, r) for r in receiver.handle(d))
    for machine in (user, server):
        machine.abort()
    transcript.channel_lines = channel.transcript_lines(reveal)
    return SessionResult(server.decision, user.decision, transcript, user, server)


def qkd_run(params: SessionParams, user_keys: KeyStore, server_keys: KeyStore | None = None,
            seed=0, **kw):
    """(sk_user or None, sk_server or None, server decision)."""
    if params.mode is not Mode.QKD:
        raise ValueError("qkd_run needs a QKD-mode session")
    res = run_session(params, user_keys, server_keys, seed, **kw)
    sk_user = res.sk_user if res.user.accept else None
    sk_server = res.sk_server if res.server.accept else None
    return sk_user, sk_server, res.server


def mutual_qid_run(params: SessionParams, user_keys: KeyStore, server_keys: KeyStore | None = None,
                   seed=0, **kw):
    """(server decision, user decision) for the mutual variant."""
    if params.mode is not Mode.MUTUAL:
        raise ValueError("mutual_qid_run needs a MUTUAL-mode session")
    res = run_session(params, user_keys, server_keys, seed, **kw)
    return res.server, res.user
