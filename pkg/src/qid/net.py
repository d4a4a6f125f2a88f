"""TCP transport: user, server and man-in-the-middle proxy loops.

Each role derives its generators from the shared session seed exactly as
the in-memory runner does, so a loopback run produces the same frame
transcript as ``run_session`` with that seed.  Transport failures and
timeouts abort the session; they never decide it.
"""

from __future__ import annotations

import queue
import socket
import threading
import time
from dataclasses import dataclass, field

from .adversaries.attacks import AttackSpec, Link, Strategy, intercept_tap
from .protocols.machines import KeyStore, ServerMachine, UserMachine
from .protocols.messages import Decision, FrameType, QubitsMsg
from .protocols.params import SessionParams
from .protocols.runner import S2U, U2S, Transcript, session_rngs
from .qchannel import Channel, ChannelConfig
from .wire import (Frame, QubitPayload, TransportError, WireError, deliver_qubits, frame_message,
                   message_frame, recv_frame, send_frame)

DEFAULT_TIMEOUT = 5.0
QUEUE_SIZE = 16


def parse_endpoint(text: str) -> tuple[str, int]:
    host, _, port = text.rpartition(":")
    if not host or not port.isdigit():
        raise ValueError(f"endpoint must be host:port, got {text!r}")
    return host, int(port)


def listen(endpoint: str | tuple = ("127.0.0.1", 0)) -> socket.socket:
    addr = parse_endpoint(endpoint) if isinstance(endpoint, str) else endpoint
    sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
    sock.bind(addr)
    sock.listen(1)
    return sock


def connect(address, timeout: float) -> socket.socket:
    """Connect, retrying refused connections until ``timeout`` (peer may still be starting)."""
    addr = parse_endpoint(address) if isinstance(address, str) else address
    deadline = time.monotonic() + timeout
    while True:
        try:
            sock = socket.create_connection(addr, timeout=timeout)
            break
        except ConnectionRefusedError:
            if time.monotonic() >= deadline:
                raise
            time.sleep(0.05)
    sock.settimeout(timeout)
    return sock


@dataclass
class NetOutcome:
    """One endpoint's view of a networked session."""

    decision: Decision
    transcript: Transcript
    machine: object
    error: str | None = None

    @property
    def sk(self):
        return self.machine.sk if self.decision.accept else None


def _channel(rngs, phi: float, eta: float) -> Channel:
    return Channel(ChannelConfig(phi, eta), rngs["source"], rngs["medium"])


def _finish(machine, transcript, channel, error=None) -> NetOutcome:
    machine.abort()
    transcript.channel_lines = channel.transcript_lines()
    return NetOutcome(machine.decision, transcript, machine, error)


def serve_server(params: SessionParams, keys: KeyStore, listener: socket.socket, seed=0,
                 timeout: float = DEFAULT_TIMEOUT, phi: float = 0.0, eta: float = 0.0,
                 accept_timeout: float | None = None) -> NetOutcome:
    """Accept one connection and run the server state machine over it."""
    rngs = session_rngs(seed)
    channel = _channel(rngs, phi, eta)
    server = ServerMachine(params, keys, rngs["server"], channel)
    transcript = Transcript()
    listener.settimeout(accept_timeout)
    try:
        conn, _ = listener.accept()
    except OSError as exc:
        return _finish(server, transcript, channel, f"accept failed: {exc}")
    conn.settimeout(timeout)
    error = None
    with conn:
        try:
            while not server.terminal:
                frame = recv_frame(conn)
                msg = frame_message(frame, params.n)
                if isinstance(msg, QubitPayload):
                    msg = deliver_qubits(channel, msg)
                transcript.add(U2S, msg)
                for reply in server.handle(msg):
                    transcript.add(S2U, reply)
                    send_frame(conn, message_frame(reply))
        except (TransportError, WireError) as exc:
            error = f"{type(exc).__name__}: {exc}"
    return _finish(server, transcript, channel, error)


def run_user(params: SessionParams, keys: KeyStore, address, seed=0,
             timeout: float = DEFAULT_TIMEOUT, phi: float = 0.0, eta: float = 0.0) -> NetOutcome:
    """Connect to a server (or proxy) and run the user state machine."""
    rngs = session_rngs(seed)
    channel = _channel(rngs, phi, eta)
    user = UserMachine(params, keys, rngs["user"], channel)
    transcript = Transcript()
    error = None
    try:
        conn = connect(address, timeout)
    except OSError as exc:
        return _finish(user, transcript, channel, f"connect failed: {exc}")
    with conn:
        try:
            pending = user.start()
            while True:
                for msg in pending:
                    transcript.add(U2S, msg)
                    send_frame(conn, message_frame(msg))
                if user.terminal:
                    break
                msg = frame_message(recv_frame(conn), params.n)
                if isinstance(msg, QubitPayload):
                    raise WireError("server sent qubits")
                transcript.add(S2U, msg)
                pending = user.handle(msg)
        except (TransportError, WireError) as exc:
            error = f"{type(exc).__name__}: {exc}"
    return _finish(user, transcript, channel, error)


# --------------------------------------------------------------------------
# proxy

@dataclass
class ProxyLog:
    seen: list = field(default_factory=list)
    errors: list = field(default_factory=list)
    observed: dict = field(default_factory=dict)


class _Tamper:
    """Applies an AttackSpec to frames travelling through the proxy."""

    def __init__(self, params: SessionParams, spec: AttackSpec | None, seed, log: ProxyLog):
        self.params = params
        self.spec = spec or AttackSpec()
        self.link = Link(self.spec)
        self.log = log
        self.lock = threading.Lock()
        rngs = session_rngs(seed)
        self.tap_rng = rngs["attacker"]
        self.channel = Channel(ChannelConfig(), rngs["attacker"], rngs["attacker"])

    def __call__(self, direction: str, frame: Frame) -> list[Frame]:
        with self.lock:
            if frame.kind is FrameType.QUBITS:
                self.log.seen.append((direction, frame.kind))
                if self.spec.strategy is not Strategy.INTERCEPT_RESEND:
                    return [frame]
                payload = frame_message(frame, self.params.n)
                self.channel.tap = intercept_tap(self.spec, self.tap_rng, self.log.observed)
                batch = self.channel.deliver_external(payload.bits, payload.bases, payload.flags)
                return [Frame(FrameType.QUBITS, QubitPayload(*batch.wire_fields()).to_bytes())]
            msg = frame_message(frame)
            out = self.link(direction, msg)
            self.log.seen.append((direction, frame.kind))
            return [message_frame(m) for m in out]


def _pump(src: socket.socket, dst: socket.socket, direction: str, tamper: _Tamper, log: ProxyLog):
    q: queue.Queue = queue.Queue(QUEUE_SIZE)

    def reader():
        try:
            while True:
                for f in tamper(direction, recv_frame(src)):
                    q.put(f)
        except (TransportError, WireError) as exc:
            if "closed" not in str(exc):
                log.errors.append(f"{direction}: {exc}")
        finally:
            q.put(None)

    def writer():
        try:
            while (f := q.get()) is not None:
                send_frame(dst, f)
        except TransportError as exc:
            log.errors.append(f"{direction}: {exc}")
        finally:
            try:
                dst.shutdown(socket.SHUT_WR)
            except OSError:
                pass

    threads = [threading.Thread(target=reader, daemon=True), threading.Thread(target=writer, daemon=True)]
    for t in threads:
        t.start()
    return threads


def serve_proxy(params: SessionParams, listener: socket.socket, upstream, attack: AttackSpec | None = None,
                seed=0, timeout: float = DEFAULT_TIMEOUT, accept_timeout: float | None = None) -> ProxyLog:
    """Forward one user connection to ``upstream``, tampering per ``attack``."""
    log = ProxyLog()
    listener.settimeout(accept_timeout)
    try:
        user_side, _ = listener.accept()
    except OSError as exc:
        log.errors.append(f"accept failed: {exc}")
        return log
    user_side.settimeout(timeout)
    try:
        server_side = connect(upstream, timeout)
    except OSError as exc:
        log.errors.append(f"upstream connect failed: {exc}")
        user_side.close()
        return log
    tamper = _Tamper(params, attack, seed, log)
    with user_side, server_side:
        threads = _pump(user_side, server_side, U2S, tamper, log) + _pump(server_side, user_side, S2U, tamper, log)
        for t in threads:
            t.join()
    return log


# --------------------------------------------------------------------------
# loopback convenience

@dataclass
class NetSession:
    server: NetOutcome
    user: NetOutcome
    proxy: ProxyLog | None


def loopback_session(params: SessionParams, user_keys: KeyStore, server_keys: KeyStore | None = None,
                     seed=0, attack: AttackSpec | None = None, timeout: float = DEFAULT_TIMEOUT,
                     phi: float = 0.0, eta: float = 0.0, proxy: bool | None = None) -> NetSession:
    """Server, optional proxy and user on 127.0.0.1 in one process (one thread each)."""
    server_keys = user_keys if server_keys is None else server_keys
    use_proxy = attack is not None if proxy is None else proxy
    results: dict = {}
    srv_sock = listen()
    server_addr = srv_sock.getsockname()

    def run_server():
        results["server"] = serve_server(params, server_keys, srv_sock, seed, timeout, phi, eta,
                                         accept_timeout=timeout)

    threads = [threading.Thread(target=run_server)]
    target = server_addr
    if use_proxy:
        px_sock = listen()
        target = px_sock.getsockname()

        def run_proxy():
            results["proxy"] = serve_proxy(params, px_sock, server_addr, attack, seed, timeout,
                                           accept_timeout=timeout)

        threads.append(threading.Thread(target=run_proxy))
    for t in threads:
        t.start()
    user = run_user(params, user_keys, target, seed, timeout, phi, eta)
    for t in threads:
        t.join()
    srv_sock.close()
    if use_proxy:
        px_sock.close()
    return NetSession(results["server"], user, results.get("proxy"))


def transcript_frames(transcript: Transcript) -> list:
    """(direction, frame, digest) triples: the transport-independent part of a transcript."""
    return [(r["dir"], r["frame"], r["bytes"], r["digest"]) for r in transcript.records]


__all__ = ["DEFAULT_TIMEOUT", "NetOutcome", "NetSession", "ProxyLog", "connect", "listen", "loopback_session",
           "parse_endpoint", "run_user", "serve_proxy", "serve_server", "transcript_frames"]
