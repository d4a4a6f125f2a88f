"""Universal hash families F, G and the extractor MAC, all built on one
truncated field product.

Conventions shared by every family here:

* bit strings are MSB-first ``uint8`` arrays;
* ``embed(y)`` zero-pads ``y`` on the right up to the field degree, so
  ``y`` and ``y + [0]*k`` hash identically;
* "the first l bits" of a field element are its l most significant bits.

Families
--------
``UhfF``   f_a(y) = first_l(a * embed(y))                  (universal-2)
``UhfG``   g_{a,b}(w) = first_l(a * embed(w - 1)) xor b    (strongly universal-2)
``MacKey`` MAC_{alpha,beta}(x) = first_l(alpha * embed(x)) xor beta
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .gf2 import FieldElement, bits_to_int, field, int_to_bits, ladder_degree

LENGTH_PREFIX_BITS = 32


def random_int(rng: np.random.Generator, nbits: int) -> int:
    """Uniform integer in [0, 2**nbits)."""
    if nbits == 0:
        return 0
    raw = rng.bytes((nbits + 7) // 8)
    return int.from_bytes(raw, "big") >> (8 * len(raw) - nbits)


def random_bits(rng: np.random.Generator, n: int) -> np.ndarray:
    return rng.integers(0, 2, size=n, dtype=np.uint8)


def _truncated_product(a: FieldElement, y_bits, ell: int) -> int:
    deg = a.spec.degree
    y = np.asarray(y_bits, dtype=np.uint8)
    if y.size > deg:
        raise ValueError(f"input of {y.size} bits exceeds field degree {deg}")
    v = bits_to_int(y) << (deg - y.size)
    return a.spec.mul(a.value, v) >> (deg - ell)


def bits_needed(m: int) -> int:
    """ceil(log2 m) for m >= 2."""
    if m < 2:
        raise ValueError("need at least two passwords")
    return (m - 1).bit_length()


# --------------------------------------------------------------------------
# F: x|_I  ->  {0,1}^l

@dataclass(frozen=True)
class UhfF:
    key: FieldElement
    output_len: int
    input_len: int

    def __post_init__(self):
        if not 0 <= self.output_len <= self.key.spec.degree:
            raise ValueError("output length must lie in [0, field degree]")
        if self.input_len > self.key.spec.degree:
            raise ValueError("input length exceeds field degree")

    @classmethod
    def random(cls, input_len: int, output_len: int, rng: np.random.Generator) -> "UhfF":
        spec = field(ladder_degree(max(input_len, output_len)))
        return cls(spec.element(random_int(rng, spec.degree)), output_len, input_len)

    @classmethod
    def from_key_bits(cls, bits, output_len: int, input_len: int) -> "UhfF":
        bits = np.asarray(bits, np.uint8)
        return cls(field(bits.size).element(bits_to_int(bits)), output_len, input_len)

    @property
    def key_bits(self) -> np.ndarray:
        return self.key.bits

    def __call__(self, y) -> np.ndarray:
        return uhf_f_eval(self, y)


def uhf_f_eval(f: UhfF, y) -> np.ndarray:
    y = np.asarray(y, dtype=np.uint8)
    if y.size > f.input_len:
        raise ValueError(f"|y| = {y.size} exceeds the family input length {f.input_len}")
    return int_to_bits(_truncated_product(f.key, y, f.output_len), f.output_len)


# --------------------------------------------------------------------------
# G: {1..m} -> {0,1}^l

@dataclass(frozen=True)
class UhfG:
    """Keyed map from password index to l bits.

    The multiplier lives in GF(2^r) with r = max(ceil(log2 m), l): a field
    narrower than l would leave the pair (g(w), g(w')) only 2^-r-distinct.
    """

    a: FieldElement
    b: np.ndarray
    m: int

    def __post_init__(self):
        if self.a.spec.degree < max(bits_needed(self.m), self.output_len):
            raise ValueError("multiplier field too small for m and l")

    @property
    def output_len(self) -> int:
        return int(np.asarray(self.b).size)

    @staticmethod
    def degree_for(m: int, output_len: int) -> int:
        return ladder_degree(max(bits_needed(m), output_len))

    @classmethod
    def random(cls, m: int, output_len: int, rng: np.random.Generator) -> "UhfG":
        spec = field(cls.degree_for(m, output_len))
        a = spec.element(random_int(rng, spec.degree))
        return cls(a, random_bits(rng, output_len), m)

    @property
    def key_bits(self) -> np.ndarray:
        return np.concatenate([self.a.bits, np.asarray(self.b, np.uint8)])

    @classmethod
    def from_key_bits(cls, bits, m: int, output_len: int) -> "UhfG":
        bits = np.asarray(bits, np.uint8)
        deg = bits.size - output_len
        return cls(field(deg).element(bits_to_int(bits[:deg])), bits[deg:].copy(), m)

    def __call__(self, w: int) -> np.ndarray:
        return uhf_g_eval(self, w)


def uhf_g_eval(g: UhfG, w: int) -> np.ndarray:
    if not 1 <= w <= g.m:
        raise ValueError(f"password index {w} outside 1..{g.m}")
    deg = g.a.spec.degree
    ell = g.output_len
    v = g.a.spec.mul(g.a.value, w - 1) >> (deg - ell)
    return int_to_bits(v, ell) ^ np.asarray(g.b, np.uint8)


# --------------------------------------------------------------------------
# extractor MAC

@dataclass(frozen=True)
class MacKey:
    alpha: FieldElement
    beta: np.ndarray

    @property
    def tag_len(self) -> int:
        return int(np.asarray(self.beta).size)

    @property
    def capacity(self) -> int:
        """Longest message (in bits) this key can authenticate."""
        return self.alpha.spec.degree

    @classmethod
    def random(cls, capacity_bits: int, tag_len: int, rng: np.random.Generator) -> "MacKey":
        spec = field(ladder_degree(max(capacity_bits, tag_len)))
        return cls(spec.element(random_int(rng, spec.degree)), random_bits(rng, tag_len))

    def digest(self) -> str:
        h = hashlib.sha256()
        h.update(self.alpha.spec.degree.to_bytes(4, "big"))
        h.update(bits_to_bytes(self.alpha.bits))
        h.update(bits_to_bytes(self.beta))
        return h.hexdigest()


def mac_tag(k: MacKey, message) -> np.ndarray:
    """first_l(alpha * embed(message)) xor beta."""
    msg = np.asarray(message, dtype=np.uint8)
    if msg.size > k.capacity:
        raise ValueError(
            f"message of {msg.size} bits exceeds MAC field degree {k.capacity}")
    return int_to_bits(_truncated_product(k.alpha, msg, k.tag_len), k.tag_len) ^ np.asarray(
        k.beta, np.uint8)


def mac_verify(k: MacKey, message, tag) -> bool:
    expected = mac_tag(k, message)
    tag = np.asarray(tag, dtype=np.uint8)
    return tag.shape == expected.shape and bool(np.array_equal(tag, expected))


# --------------------------------------------------------------------------
# canonical serialization

def encode_fields(parts: Sequence) -> np.ndarray:
    """Concatenate bit strings, each preceded by its 32-bit big-endian length."""
    chunks = []
    for p in parts:
        p = np.asarray(p, dtype=np.uint8).ravel()
        if p.size >= 1 << LENGTH_PREFIX_BITS:
            raise ValueError("field too long for a 32-bit length prefix")
        if p.size and p.max() > 1:
            raise ValueError("fields must be 0/1 bit strings")
        chunks.append(int_to_bits(p.size, LENGTH_PREFIX_BITS))
        chunks.append(p)
    if not chunks:
        return np.zeros(0, np.uint8)
    return np.concatenate(chunks)


def decode_fields(bits) -> list[np.ndarray]:
    """Inverse of ``encode_fields``; raises ValueError on malformed input."""
    bits = np.asarray(bits, dtype=np.uint8)
    out, pos = [], 0
    while pos < bits.size:
        if pos + LENGTH_PREFIX_BITS > bits.size:
            raise ValueError("truncated length prefix")
        n = bits_to_int(bits[pos:pos + LENGTH_PREFIX_BITS])
        pos += LENGTH_PREFIX_BITS
        if pos + n > bits.size:
            raise ValueError("field runs past end of input")
        out.append(bits[pos:pos + n].copy())
        pos += n
    return out


def encoded_length(field_lengths: Sequence[int]) -> int:
    return sum(LENGTH_PREFIX_BITS + n for n in field_lengths)


def bits_to_bytes(bits) -> bytes:
    """Pack MSB-first, zero padding the final byte."""
    return np.packbits(np.asarray(bits, dtype=np.uint8)).tobytes()


def bytes_to_bits(data: bytes, nbits: int | None = None) -> np.ndarray:
    bits = np.unpackbits(np.frombuffer(data, dtype=np.uint8))
    return bits if nbits is None else bits[:nbits].copy()
