"""Run configuration (flat key = value files) and key store persistence."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

import numpy as np

from .gf2 import bits_to_int, field
from .hashing import MacKey
from .protocols.machines import KeyStore
from .protocols.params import Mode, SessionParams

# file spellings accepted for each field
ALIASES = {"lambda": "lam", "l": "ell", "delta": "delta_tolerance", "key_store": "keystore"}


@dataclass(frozen=True)
class Config:
    mode: str = "qid"
    n: int = 64
    m: int = 4
    ell: int = 16
    lam: float = 0.05
    q: float = 0.0
    phi: float = 0.0
    eta: float = 0.0
    delta_tolerance: float = 0.0
    seed: int = 0
    code_seed: int = 0
    sk_len: int = 0
    endpoint: str = "127.0.0.1:7370"
    keystore: str = ""
    timeout: float = 5.0

    def __post_init__(self):
        Mode(self.mode)
        if not 0 < self.lam < 0.25:
            raise ValueError("lambda must lie in (0, 1/4)")
        if self.q < 0:
            raise ValueError("quantum memory q must be nonnegative")
        if self.timeout <= 0:
            raise ValueError("timeout must be positive")
        if self.phi > 0 and not Mode(self.mode).reconciles:
            raise ValueError(f"mode {self.mode} has no reconciliation: phi must be 0")
        if self.phi > 0 and self.phi >= self.delta_tolerance:
            raise ValueError("phi must stay below delta_tolerance or honest runs fail")

    def params(self) -> SessionParams:
        kw = {"sk_len": self.sk_len} if self.mode == "qkd" and self.sk_len else {}
        return SessionParams.build(self.mode, self.n, self.m, self.ell,
                                   delta_tolerance=self.delta_tolerance, code_seed=self.code_seed, **kw)

    def validated(self) -> "Config":
        """Raises ValueError if the session parameters cannot be built."""
        self.params()
        return self

    def with_overrides(self, **values) -> "Config":
        known = {f.name for f in fields(self)}
        return replace(self, **{k: v for k, v in values.items() if k in known and v is not None})

    def to_dict(self) -> dict:
        return asdict(self)


def _coerce(name: str, text: str):
    kind = {f.name: f.type for f in fields(Config)}[name]
    if kind == "int":
        return int(text)
    if kind == "float":
        return float(text)
    return text


def parse_config(text: str) -> dict:
    """key = value lines; '#' starts a comment; unknown keys are errors."""
    known = {f.name for f in fields(Config)}
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ValueError(f"line {lineno}: expected key = value")
        key = key.strip().lower().replace("-", "_")
        key = ALIASES.get(key, key)
        if key not in known:
            raise ValueError(f"line {lineno}: unknown key {key!r}")
        out[key] = _coerce(key, value.strip())
    return out


def load_config(path=None, **overrides) -> Config:
    """File values, then overrides (None means not given); validated."""
    values = parse_config(Path(path).read_text()) if path else {}
    return Config(**values).with_overrides(**overrides).validated()


# --------------------------------------------------------------------------
# key store

def keystore_to_json(keys: KeyStore, session_keys=()) -> str:
    mac = None
    if keys.mac_key is not None:
        k = keys.mac_key
        mac = {"degree": k.alpha.spec.degree, "alpha": format(k.alpha.value, "x"),
               "beta": "".join(str(int(b)) for b in k.beta)}
    return json.dumps({"w": keys.w, "mac": mac, "session_keys": list(session_keys)}, indent=1)


def keystore_from_json(text: str) -> tuple[KeyStore, list]:
    d = json.loads(text)
    mac = None
    if d.get("mac"):
        spec = field(int(d["mac"]["degree"]))
        beta = np.array([int(c) for c in d["mac"]["beta"]], np.uint8)
        mac = MacKey(spec.element(int(d["mac"]["alpha"], 16)), beta)
    return KeyStore(int(d["w"]), mac), list(d.get("session_keys", []))


def load_or_create_keystore(path: str, params: SessionParams, seed: int = 0) -> tuple[KeyStore, list]:
    """Read the store at ``path``; create it (from ``seed``) if it does not exist."""
    if path and Path(path).exists():
        keys, sks = keystore_from_json(Path(path).read_text())
        if not 1 <= keys.w <= params.m:
            raise ValueError(f"stored password {keys.w} outside 1..{params.m}")
        if params.mode.authenticated and keys.mac_key is None:
            raise ValueError("authenticated mode needs a MAC key in the key store")
        if keys.mac_key is not None and keys.mac_key.capacity < params.mac_message_bits:
            raise ValueError("stored MAC key is too short for these parameters")
        return keys, sks
    keys = KeyStore.generate(params, np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(7,))))
    if path:
        Path(path).write_text(keystore_to_json(keys))
    return keys, []


def append_session_key(path: str, sk) -> None:
    keys, sks = keystore_from_json(Path(path).read_text())
    sks.append(bits_hex(sk))
    Path(path).write_text(keystore_to_json(keys, sks))


def bits_hex(bits) -> str:
    bits = np.asarray(bits, np.uint8)
    return format(bits_to_int(bits), "x").zfill((bits.size + 3) // 4) if bits.size else ""


__all__ = ["Config", "append_session_key", "bits_hex", "keystore_from_json",
           "keystore_to_json", "load_config", "load_or_create_keystore", "parse_config"]
