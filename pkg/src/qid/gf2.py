"""Binary polynomial arithmetic and the fields GF(2^N).

Polynomials over GF(2) are Python ints: bit ``i`` is the coefficient of
``x**i``.  Field elements are written MSB-first, so the highest-degree
coefficient is the first bit of the element's bit string.

Moduli are the lexicographically smallest irreducible polynomial of each
degree (smallest integer value with the leading bit set).  Degrees up to 64
are tabulated and re-verified on first use with a distinct-degree test;
larger degrees are searched once and cached, and verified with Rabin's test.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np

__all__ = [
    "FieldSpec",
    "FieldElement",
    "clmul",
    "poly_mod",
    "poly_gcd",
    "is_irreducible",
    "smallest_irreducible",
    "field",
    "ladder_degree",
    "gf_mul",
    "bits_to_int",
    "int_to_bits",
]


# --------------------------------------------------------------------------
# bit strings

def bits_to_int(bits) -> int:
    """MSB-first 0/1 sequence to int."""
    arr = np.asarray(bits, dtype=np.uint8)
    if arr.size == 0:
        return 0
    pad = (-arr.size) % 8
    packed = np.packbits(np.concatenate([np.zeros(pad, np.uint8), arr]))
    return int.from_bytes(packed.tobytes(), "big")


def int_to_bits(value: int, length: int) -> np.ndarray:
    """int to an MSB-first uint8 array of exactly ``length`` bits."""
    if value < 0 or value.bit_length() > length:
        raise ValueError(f"value does not fit in {length} bits")
    if length == 0:
        return np.zeros(0, np.uint8)
    nbytes = (length + 7) // 8
    raw = np.frombuffer(value.to_bytes(nbytes, "big"), dtype=np.uint8)
    return np.unpackbits(raw)[8 * nbytes - length:].copy()


# --------------------------------------------------------------------------
# polynomial arithmetic

def _spread_table(shift: int) -> bytes:
    out = bytearray(256)
    for b in range(256):
        nib = (b >> shift) & 0xF
        v = 0
        for i in range(4):
            if nib >> i & 1:
                v |= 1 << (2 * i)
        out[b] = v
    return bytes(out)


_SPREAD_LO = _spread_table(0)
_SPREAD_HI = _spread_table(4)


def poly_square(a: int) -> int:
    """a(x)**2 over GF(2): interleave zero bits."""
    if a == 0:
        return 0
    nbytes = (a.bit_length() + 7) // 8
    raw = a.to_bytes(nbytes, "little")
    out = bytearray(2 * nbytes)
    out[0::2] = raw.translate(_SPREAD_LO)
    out[1::2] = raw.translate(_SPREAD_HI)
    return int.from_bytes(out, "little")


def clmul(a: int, b: int) -> int:
    """Carry-less product of two binary polynomials."""
    if a == 0 or b == 0:
        return 0
    if a.bit_length() < b.bit_length():
        a, b = b, a
    if b.bit_length() <= 8:
        r = 0
        while b:
            low = b & -b
            r ^= a << (low.bit_length() - 1)
            b ^= low
        return r
    # 4-bit windows over b, multiples of a precomputed
    t = [0] * 16
    for k in range(1, 16):
        t[k] = t[k & (k - 1)] ^ (a << ((k & -k).bit_length() - 1))
    nib = (b.bit_length() + 3) // 4
    r = 0
    for i in range(nib - 1, -1, -1):
        r = (r << 4) ^ t[(b >> (4 * i)) & 0xF]
    return r


def poly_mod(a: int, m: int) -> int:
    """Remainder of a modulo m (m != 0)."""
    if m == 0:
        raise ZeroDivisionError("polynomial modulus is zero")
    dm = m.bit_length()
    while a.bit_length() >= dm:
        a ^= m << (a.bit_length() - dm)
    return a


def poly_gcd(a: int, b: int) -> int:
    while b:
        a, b = b, poly_mod(a, b)
    return a


class _Reducer:
    """Fast reduction modulo x^N + low where deg(low) is small."""

    def __init__(self, modulus: int):
        self.degree = modulus.bit_length() - 1
        self.mask = (1 << self.degree) - 1
        self.low = modulus ^ (1 << self.degree)
        self.sparse = bin(self.low).count("1") <= 16
        self.exps = [i for i in range(self.low.bit_length()) if self.low >> i & 1]

    def __call__(self, p: int) -> int:
        n, mask = self.degree, self.mask
        while p >> n:
            hi = p >> n
            p &= mask
            if self.sparse:
                for e in self.exps:
                    p ^= hi << e
            else:
                p ^= clmul(hi, self.low)
        return p


def _factor_primes(n: int) -> list[int]:
    out, p = [], 2
    while p * p <= n:
        if n % p == 0:
            out.append(p)
            while n % p == 0:
                n //= p
        p += 1
    if n > 1:
        out.append(n)
    return out


def _distinct_degree_irreducible(f: int) -> bool:
    """No irreducible factor of any degree <= N/2: gcd(f, x^(2^i) - x) = 1."""
    n = f.bit_length() - 1
    red = _Reducer(f)
    r = 2  # x
    for _ in range(n // 2):
        r = red(poly_square(r))
        if poly_gcd(f, r ^ 2) != 1:
            return False
    return True


def _small_factor_screen(f: int, upto: int = 10) -> bool:
    """False if f has an irreducible factor of degree <= upto.

    Uses x^(2^i) = x mod (x^(2^i) + x), so f is folded into a short
    polynomial before the gcd.
    """
    for i in range(1, upto + 1):
        k = 1 << i
        g = f
        while g.bit_length() > k:  # fold x^k -> x
            hi = g >> k
            g = (g & ((1 << k) - 1)) ^ (hi << 1)
        if poly_gcd((1 << k) | 2, g) != 1:
            return False
    return True


def _rabin_irreducible(f: int) -> bool:
    n = f.bit_length() - 1
    red = _Reducer(f)
    powers = {}
    wanted = {n // p for p in _factor_primes(n)}
    r = 2
    for i in range(1, n + 1):
        r = red(poly_square(r))
        if i in wanted:
            powers[i] = r
    if r != 2:
        return False
    return all(poly_gcd(f, powers[k] ^ 2) == 1 for k in wanted)


def is_irreducible(f: int) -> bool:
    """Irreducibility over GF(2) of the polynomial with bit pattern ``f``."""
    n = f.bit_length() - 1
    if n < 1:
        return False
    if n == 1:
        return True
    if not f & 1:
        return False
    if n <= 64:
        return _distinct_degree_irreducible(f)
    return _small_factor_screen(f, min(10, n // 2)) and _rabin_irreducible(f)


# Lexicographically smallest irreducible polynomial of each degree 1..64,
# stored as the low part (modulus minus x^N).  Produced by
# scripts/tabulate_moduli.py and re-verified by ``field``.
_SMALL_MODULI_LOW = {
    1: 0x0, 2: 0x3, 3: 0x3, 4: 0x3, 5: 0x5, 6: 0x3, 7: 0x3, 8: 0x1B,
    9: 0x3, 10: 0x9, 11: 0x5, 12: 0x9, 13: 0x1B, 14: 0x21, 15: 0x3,
    16: 0x2B, 17: 0x9, 18: 0x9, 19: 0x27, 20: 0x9, 21: 0x5, 22: 0x3,
    23: 0x21, 24: 0x1B, 25: 0x9, 26: 0x1B, 27: 0x27, 28: 0x3, 29: 0x5,
    30: 0x3, 31: 0x9, 32: 0x8D, 33: 0x4B, 34: 0x1B, 35: 0x5, 36: 0x35,
    37: 0x3F, 38: 0x63, 39: 0x11, 40: 0x39, 41: 0x9, 42: 0x27, 43: 0x59,
    44: 0x21, 45: 0x1B, 46: 0x3, 47: 0x21, 48: 0x2D, 49: 0x71, 50: 0x1D,
    51: 0x4B, 52: 0x9, 53: 0x47, 54: 0x7D, 55: 0x47, 56: 0x95, 57: 0x11,
    58: 0x63, 59: 0x7B, 60: 0x3, 61: 0x27, 62: 0x69, 63: 0x3, 64: 0x1B,
}


def smallest_irreducible(degree: int) -> int:
    """Search for the smallest irreducible polynomial of ``degree``."""
    if degree < 1:
        raise ValueError("degree must be >= 1")
    if degree == 1:
        return 0b10
    base = 1 << degree
    for low in range(1, base, 2):
        f = base | low
        if bin(f).count("1") % 2 == 0:  # divisible by x + 1
            continue
        if is_irreducible(f):
            return f
    raise AssertionError("unreachable: irreducibles exist in every degree")


# Field degrees above 64 are rounded up to this ladder so their moduli can
# be tabulated: (exclusive upper limit, step).
LADDER_STEPS = ((2048, 64), (1 << 62, 256))


def ladder_degree(bits: int) -> int:
    """Smallest supported field degree that holds ``bits`` bits."""
    if bits <= 64:
        return max(bits, 1)
    for limit, step in LADDER_STEPS:
        if bits <= limit:
            return -(-bits // step) * step
    raise AssertionError("unreachable")


@functools.lru_cache(maxsize=None)
def _modulus(degree: int) -> int:
    if degree in _SMALL_MODULI_LOW:
        f = (1 << degree) | _SMALL_MODULI_LOW[degree]
        if not is_irreducible(f):
            raise RuntimeError(f"tabulated modulus for degree {degree} is reducible")
        return f
    from . import _moduli_large

    low = _moduli_large.LOW.get(degree)
    if low is not None:
        f = (1 << degree) | low
        if not is_irreducible(f):
            raise RuntimeError(f"tabulated modulus for degree {degree} is reducible")
        return f
    return smallest_irreducible(degree)


# --------------------------------------------------------------------------
# fields

@dataclass(frozen=True)
class FieldSpec:
    """GF(2^degree) with a fixed irreducible modulus."""

    degree: int
    modulus: int

    def __post_init__(self):
        if self.modulus.bit_length() - 1 != self.degree:
            raise ValueError("modulus degree does not match field degree")

    @functools.cached_property
    def _reducer(self) -> _Reducer:
        return _Reducer(self.modulus)

    @property
    def order(self) -> int:
        return 1 << self.degree

    def mul(self, a: int, b: int) -> int:
        return self._reducer(clmul(a, b))

    def inverse(self, a: int) -> int:
        if a == 0:
            raise ZeroDivisionError("zero has no inverse")
        # a^(2^N - 2) by square-and-multiply over the exponent's bits
        result, base, e = 1, a, (1 << self.degree) - 2
        while e:
            if e & 1:
                result = self.mul(result, base)
            base = self._reducer(poly_square(base))
            e >>= 1
        return result

    def element(self, value) -> "FieldElement":
        if not isinstance(value, int):
            bits = np.asarray(value, dtype=np.uint8)
            if bits.size != self.degree:
                raise ValueError(f"expected {self.degree} bits, got {bits.size}")
            value = bits_to_int(bits)
        if value < 0 or value >> self.degree:
            raise ValueError(f"{value} is not an element of GF(2^{self.degree})")
        return FieldElement(value, self)

    def mul_table(self) -> np.ndarray:
        """Full multiplication table (read-only); only for small degrees."""
        if self.degree > 12:
            raise ValueError("multiplication table limited to degree <= 12")
        return self._mul_table

    @functools.cached_property
    def _mul_table(self) -> np.ndarray:
        deg = self.degree
        r = np.arange(self.order, dtype=np.int64)
        a, b = r[:, None], r[None, :]
        acc = np.zeros((self.order, self.order), dtype=np.int64)
        for i in range(deg):
            acc ^= np.where((b >> i) & 1, a << i, 0)
        for i in range(2 * deg - 2, deg - 1, -1):
            acc ^= ((acc >> i) & 1) * (self.modulus << (i - deg))
        acc.setflags(write=False)
        return acc


@functools.lru_cache(maxsize=None)
def field(degree: int) -> FieldSpec:
    """The canonical field of the given degree."""
    return FieldSpec(degree, _modulus(degree))


@dataclass(frozen=True)
class FieldElement:
    value: int
    spec: FieldSpec

    @property
    def bits(self) -> np.ndarray:
        return int_to_bits(self.value, self.spec.degree)

    def _check(self, other: "FieldElement"):
        if not isinstance(other, FieldElement) or other.spec != self.spec:
            raise ValueError("field elements belong to different fields")

    def __add__(self, other: "FieldElement") -> "FieldElement":
        self._check(other)
        return FieldElement(self.value ^ other.value, self.spec)

    __sub__ = __add__

    def __mul__(self, other: "FieldElement") -> "FieldElement":
        return gf_mul(self, other)

    def inverse(self) -> "FieldElement":
        return FieldElement(self.spec.inverse(self.value), self.spec)

    def __repr__(self) -> str:
        bits = "".join(map(str, self.bits))
        return f"GF(2^{self.spec.degree})<{bits}>"


def gf_mul(a: FieldElement, b: FieldElement) -> FieldElement:
    """Field product; both operands must share a FieldSpec."""
    a._check(b)
    return FieldElement(a.spec.mul(a.value, b.value), a.spec)
