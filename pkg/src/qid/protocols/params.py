"""Session parameters shared (publicly) by user and server."""

from __future__ import annotations

import enum
import functools
import math
from dataclasses import dataclass

from ..codes import BasisCode, SyndromeFamily, build_basis_code, gv_feasible
from ..gf2 import ladder_degree
from ..hashing import UhfG, bits_needed, encoded_length

J_BITS = SyndromeFamily.INDEX_BITS


class Mode(str, enum.Enum):
    QID = "qid"
    QID_NOISY = "qid_noisy"
    QIDPLUS = "qidplus"
    QKD = "qkd"
    MUTUAL = "mutual"

    @property
    def authenticated(self) -> bool:
        return self in (Mode.QIDPLUS, Mode.QKD)

    @property
    def reconciles(self) -> bool:
        return self in (Mode.QID_NOISY, Mode.QIDPLUS, Mode.QKD)


class SpotCheck(str, enum.Enum):
    """How the server compares test with test' on V when errors are tolerated.

    BINOMIAL rejects when the error count on V is implausible (one-sided exact
    binomial test at ``test_level``) for an error rate of delta/2.  FLAT
    rejects whenever the error fraction on V exceeds delta/2.
    """

    BINOMIAL = "binomial"
    FLAT = "flat"


@functools.lru_cache(maxsize=64)
def default_basis_code(m: int, n: int, seed: int = 0) -> BasisCode:
    return build_basis_code(m, n, gv_feasible(n, m), seed)


@dataclass(frozen=True, eq=False)
class SessionParams:
    n: int
    m: int
    ell: int
    mode: Mode
    basis_code: BasisCode
    syndrome_family: SyndromeFamily | None = None
    delta_tolerance: float = 0.0
    test_rule: SpotCheck = SpotCheck.BINOMIAL
    test_level: float = 0.01
    sk_len: int = 0
    flip_prob: float = 0.0
    closeness_threshold: float = 0.25

    def __post_init__(self):
        if self.ell < 1:
            raise ValueError("l must be at least 1")
        if self.basis_code.m != self.m or self.basis_code.n != self.n:
            raise ValueError("basis code does not match (m, n)")
        if self.mode.reconciles and self.syndrome_family is None:
            raise ValueError(f"mode {self.mode.value} needs a syndrome family")
        if self.mode.authenticated and self.ell > self.n:
            raise ValueError("the test set T needs l <= n")
        if not 0 <= self.delta_tolerance < 0.5:
            raise ValueError("delta tolerance must lie in [0, 1/2)")
        if self.mode is Mode.QKD and self.sk_len <= bits_needed(self.m):
            raise ValueError("QKD output must exceed the ceil(log2 m) confirmation pad")
        if self.mode is Mode.MUTUAL:
            if not 0 <= self.flip_prob < 0.5:
                raise ValueError("flip probability must lie in [0, 1/2)")
            if not self.flip_prob <= self.closeness_threshold < 0.5:
                raise ValueError("closeness threshold must lie in [flip_prob, 1/2)")

    @classmethod
    def build(cls, mode: Mode | str, n: int, m: int, ell: int, *, delta_tolerance: float = 0.0,
              code_seed: int = 0, basis_code: BasisCode | None = None, **kw) -> "SessionParams":
        mode = Mode(mode)
        code = basis_code or default_basis_code(m, n, code_seed)
        family = None
        if mode.reconciles:
            family = SyndromeFamily.for_length(math.ceil(n / 2), delta_tolerance, seed=code_seed)
        if mode is Mode.QKD and "sk_len" not in kw:
            kw["sk_len"] = 128 + bits_needed(m)
        return cls(n, m, ell, mode, code, family, delta_tolerance, **kw)

    # -- derived sizes -----------------------------------------------------

    @property
    def w_bits(self) -> int:
        return bits_needed(self.m)

    @property
    def f_key_bits(self) -> int:
        return ladder_degree(max(self.n, self.ell))

    @property
    def g_key_bits(self) -> int:
        return UhfG.degree_for(self.m, self.ell) + self.ell

    @property
    def ext_key_bits(self) -> int:
        return ladder_degree(max(self.n, self.sk_len)) if self.mode is Mode.QKD else 0

    @property
    def max_syndrome_bits(self) -> int:
        fam = self.syndrome_family
        return fam.syndrome_len + max(0, self.n - fam.length)

    @property
    def mac_message_bits(self) -> int:
        """Upper bound on the serialized MAC input."""
        if not self.mode.authenticated:
            return 0
        lengths = [self.n, J_BITS, self.max_syndrome_bits, self.f_key_bits, self.g_key_bits,
                   self.n, self.ell, self.ell, self.n]
        if self.mode is Mode.QKD:
            lengths.append(self.ext_key_bits)
        return encoded_length(lengths)

    @property
    def mac_field_degree(self) -> int:
        return ladder_degree(self.mac_message_bits) if self.mode.authenticated else 0

    def describe(self) -> dict:
        d = {"mode": self.mode.value, "n": self.n, "m": self.m, "l": self.ell,
             "code_distance": self.basis_code.d, "delta_tolerance": self.delta_tolerance}
        if self.syndrome_family is not None:
            fam = self.syndrome_family
            d["syndrome_code"] = f"{fam.blocks} x {fam.base.name} (radius {fam.decode_radius}/block)"
        if self.mode.authenticated:
            d["mac_field_degree"] = self.mac_field_degree
        if self.mode is Mode.QKD:
            d["sk_len"] = self.sk_len
        if self.mode is Mode.MUTUAL:
            d["flip_prob"] = self.flip_prob
            d["closeness_threshold"] = self.closeness_threshold
        return d
