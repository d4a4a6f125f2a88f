"""Basis codes for password encoding and syndrome families for reconciliation.

Bases are stored as 0/1 arrays: 0 is the computational (+) basis and 1 is
the diagonal (x) basis.  All code construction is seeded and deterministic.
"""

from __future__ import annotations

import functools
import itertools
import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from .analysis.binary_entropy import h_inverse
from .gf2 import field as gf_field

BASIS_SYMBOLS = "+x"


def bases_to_str(bases) -> str:
    return "".join(BASIS_SYMBOLS[b] for b in np.asarray(bases))


def str_to_bases(text: str) -> np.ndarray:
    table = {"+": 0, "x": 1, "×": 1, "0": 0, "1": 1}
    return np.array([table[c] for c in text], dtype=np.uint8)


def pairwise_min_distance(words: np.ndarray) -> int:
    words = np.asarray(words, dtype=np.uint8)
    if len(words) < 2:
        return words.shape[1] if words.ndim == 2 else 0
    best = words.shape[1]
    for i in range(len(words) - 1):
        dist = np.count_nonzero(words[i + 1:] != words[i], axis=1)
        best = min(best, int(dist.min()))
    return best


# --------------------------------------------------------------------------
# basis code

@dataclass(frozen=True, eq=False)
class BasisCode:
    """Map from passwords 1..m to basis strings in {+, x}^n."""

    codewords: np.ndarray
    d: int = dc_field(init=False)

    def __post_init__(self):
        cw = np.array(self.codewords, dtype=np.uint8)
        if cw.ndim != 2 or len(cw) < 2:
            raise ValueError("need at least two codewords")
        if cw.max(initial=0) > 1:
            raise ValueError("codewords must be 0/1 basis strings")
        if len({c.tobytes() for c in cw}) != len(cw):
            raise ValueError("codewords must be distinct")
        cw.setflags(write=False)
        object.__setattr__(self, "codewords", cw)
        object.__setattr__(self, "d", pairwise_min_distance(cw))

    @property
    def m(self) -> int:
        return self.codewords.shape[0]

    @property
    def n(self) -> int:
        return self.codewords.shape[1]

    def encode(self, w: int) -> np.ndarray:
        if not 1 <= w <= self.m:
            raise ValueError(f"password index {w} outside 1..{self.m}")
        return self.codewords[w - 1]

    def info_set(self, theta, w: int) -> np.ndarray:
        """0-based positions i with theta_i equal to the codeword of w."""
        return np.flatnonzero(np.asarray(theta, np.uint8) == self.encode(w))

    def to_text(self) -> str:
        lines = [f"basis-code m={self.m} n={self.n} d={self.d}"]
        lines += [bases_to_str(c) for c in self.codewords]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "BasisCode":
        lines = [ln.strip() for ln in text.strip().splitlines()]
        header = dict(kv.split("=") for kv in lines[0].split()[1:])
        code = cls(np.array([str_to_bases(ln) for ln in lines[1:]]))
        if code.m != int(header["m"]) or code.n != int(header["n"]):
            raise ValueError("header does not match codewords")
        if code.d != int(header["d"]):
            raise ValueError(f"stated distance {header['d']} but recomputed {code.d}")
        return code


class CodeSearchError(RuntimeError):
    def __init__(self, message: str, best_distance: int):
        super().__init__(message)
        self.best_distance = best_distance


def gv_feasible(n: int, m: int) -> int:
    """floor(n * h^-1(1 - log2(m)/n))."""
    if m < 2:
        raise ValueError("m must be at least 2")
    if math.log2(m) > n:
        raise ValueError("m exceeds 2^n")
    return math.floor(n * h_inverse(1 - math.log2(m) / n))


def build_basis_code(m: int, n: int, target_d: int, seed: int = 0,
                     restarts: int = 64, candidates: int = 64) -> BasisCode:
    """Seeded max-min greedy search for m words at pairwise distance >= target_d.

    Each restart starts from the all-+ word and adds, one at a time, the best
    of ``candidates`` uniform draws (largest distance to the words so far).
    The first restart meeting ``target_d`` wins.
    """
    if m < 2:
        raise ValueError("m must be at least 2")
    if m > 2 ** n:
        raise ValueError("m exceeds 2^n")
    if target_d > n:
        raise ValueError(f"target distance {target_d} exceeds length {n}")
    if m == 2:
        return BasisCode(np.array([np.zeros(n), np.ones(n)], dtype=np.uint8))
    if m == 2 ** n:
        if target_d > 1:
            raise CodeSearchError("every word used; distance is 1", 1)
        words = np.array(list(itertools.product([0, 1], repeat=n)), dtype=np.uint8)
        return BasisCode(words)

    rng = np.random.default_rng(np.random.SeedSequence([seed, m, n, target_d]))
    best = -1
    for _ in range(restarts):
        words = np.zeros((m, n), dtype=np.uint8)
        dist_to_set = None
        for k in range(1, m):
            cand = rng.integers(0, 2, size=(candidates, n), dtype=np.uint8)
            dmat = (cand[:, None, :] != words[None, :k, :]).sum(axis=2)
            score = dmat.min(axis=1)
            pick = int(np.argmax(score))
            words[k] = cand[pick]
            dist_to_set = score[pick] if dist_to_set is None else min(dist_to_set, score[pick])
            if dist_to_set < target_d:
                break
        else:
            if len({w.tobytes() for w in words}) == m:
                code = BasisCode(words)
                if code.d >= target_d:
                    return code
                best = max(best, code.d)
                continue
        best = max(best, int(dist_to_set))
    raise CodeSearchError(
        f"no ({m}, {n}) code with distance {target_d} within budget; best {best}", best)


# --------------------------------------------------------------------------
# GF(2) linear algebra

def gf2_rref(a: np.ndarray) -> tuple[np.ndarray, list[int]]:
    a = np.array(a, dtype=np.uint8) & 1
    rows, cols = a.shape
    pivots = []
    r = 0
    for c in range(cols):
        if r == rows:
            break
        hits = np.flatnonzero(a[r:, c])
        if hits.size == 0:
            continue
        p = r + hits[0]
        a[[r, p]] = a[[p, r]]
        mask = a[:, c].astype(bool)
        mask[r] = False
        a[mask] ^= a[r]
        pivots.append(c)
        r += 1
    return a, pivots


def gf2_rank(a: np.ndarray) -> int:
    return len(gf2_rref(a)[1])


def gf2_nullspace(a: np.ndarray) -> np.ndarray:
    """Basis (as rows) of {v : a v = 0}."""
    a = np.asarray(a, dtype=np.uint8)
    rref, pivots = gf2_rref(a)
    n = a.shape[1]
    free = [c for c in range(n) if c not in pivots]
    basis = np.zeros((len(free), n), dtype=np.uint8)
    for i, f in enumerate(free):
        basis[i, f] = 1
        for row, p in enumerate(pivots):
            basis[i, p] = rref[row, f]
    return basis


def _rows_to_ints(rows: np.ndarray) -> np.ndarray:
    n = rows.shape[1]
    weights = np.array([1 << (n - 1 - i) for i in range(n)], dtype=object)
    return np.array([int((r.astype(object) * weights).sum()) for r in rows], dtype=np.int64)


def _span_ints(rows: np.ndarray) -> np.ndarray:
    span = np.zeros(1, dtype=np.int64)
    for g in _rows_to_ints(rows):
        span = np.concatenate([span, span ^ g])
    return span


def _min_distance(hmat: np.ndarray) -> int:
    """Exact minimum distance: enumerate codewords when the dimension is
    small, otherwise the smallest dependent set of parity-check columns."""
    r, n = hmat.shape
    k = n - r
    if k == 0:
        return n + 1  # only the zero word
    if k <= 20:
        return int(np.bitwise_count(_span_ints(gf2_nullspace(hmat))[1:]).min())
    cols = [int(c) for c in _rows_to_ints(hmat.T)]
    for w in range(1, n + 1):
        for combo in itertools.combinations(cols, w):
            acc = 0
            for c in combo:
                acc ^= c
            if acc == 0:
                return w
    raise AssertionError("unreachable: k > 0 means a dependent column set exists")


# --------------------------------------------------------------------------
# linear codes

MAX_TABLE_REDUNDANCY = 24


@dataclass(frozen=True, eq=False)
class LinearCode:
    """Binary [n, k, d] code given by a full-rank parity-check matrix.

    ``d`` is computed by enumerating all 2^k codewords, and syndrome-table
    decoding corrects every error pattern of weight <= (d - 1) // 2.
    """

    parity_check: np.ndarray
    name: str = ""
    d: int = dc_field(init=False)

    def __post_init__(self):
        hmat = np.array(self.parity_check, dtype=np.uint8) & 1
        if gf2_rank(hmat) != hmat.shape[0]:
            raise ValueError("parity-check matrix is not full row rank")
        if hmat.shape[0] > MAX_TABLE_REDUNDANCY:
            raise ValueError("redundancy too large for table decoding")
        hmat.setflags(write=False)
        object.__setattr__(self, "parity_check", hmat)
        object.__setattr__(self, "d", _min_distance(hmat))

    @property
    def n(self) -> int:
        return self.parity_check.shape[1]

    @property
    def k(self) -> int:
        return self.n - self.parity_check.shape[0]

    @property
    def redundancy(self) -> int:
        return self.parity_check.shape[0]

    @property
    def decode_radius(self) -> int:
        return (self.d - 1) // 2

    @functools.cached_property
    def generator(self) -> np.ndarray:
        return gf2_nullspace(self.parity_check)

    @functools.cached_property
    def _column_ints(self) -> np.ndarray:
        return _rows_to_ints(self.parity_check.T)

    def syndrome_int(self, words: np.ndarray) -> np.ndarray:
        """Syndromes of the rows of ``words`` as ints (MSB = first check)."""
        words = np.atleast_2d(np.asarray(words, dtype=np.uint8))
        s = (words.astype(np.int64) @ self.parity_check.T.astype(np.int64)) & 1
        weights = 1 << np.arange(self.redundancy - 1, -1, -1, dtype=np.int64)
        return s @ weights

    @functools.cached_property
    def _leaders(self) -> tuple[np.ndarray, np.ndarray]:
        """Coset leader table: syndrome -> error pattern of weight <= radius."""
        size = 1 << self.redundancy
        leader = np.full(size, -1, dtype=np.int64)
        cols = self._column_ints
        n = self.n
        for wt in range(self.decode_radius + 1):
            for pos in itertools.combinations(range(n), wt):
                s = 0
                e = 0
                for p in pos:
                    s ^= int(cols[p])
                    e |= 1 << (n - 1 - p)
                if leader[s] != -1:
                    raise AssertionError("two correctable patterns share a syndrome")
                leader[s] = e
        patterns = np.zeros((size, n), dtype=np.uint8)
        ok = leader >= 0
        shifts = np.arange(n - 1, -1, -1, dtype=np.int64)
        patterns[ok] = ((leader[ok, None] >> shifts) & 1).astype(np.uint8)
        return ok, patterns

    def correct(self, words: np.ndarray, syndromes: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Per row: the word within radius having the given syndrome, and a success flag."""
        words = np.atleast_2d(np.asarray(words, dtype=np.uint8))
        diff = self.syndrome_int(words) ^ np.asarray(syndromes, dtype=np.int64)
        ok, patterns = self._leaders
        return words ^ patterns[diff], ok[diff]

    def to_text(self) -> str:
        width = (self.n + 3) // 4
        rows = ["".join(map(str, r)) for r in self.parity_check]
        lines = [f"linear-code n={self.n} k={self.k} d={self.d}"]
        lines += [format(int(r, 2), f"0{width}x") for r in rows]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "LinearCode":
        lines = text.strip().splitlines()
        header = dict(kv.split("=") for kv in lines[0].split()[1:])
        n = int(header["n"])
        rows = [[int(b) for b in format(int(ln, 16), f"0{n}b")] for ln in lines[1:]]
        code = cls(np.array(rows, dtype=np.uint8))
        if code.k != int(header["k"]) or code.d != int(header["d"]):
            raise ValueError("header does not match recomputed parameters")
        return code

    # -- constructions -----------------------------------------------------

    @classmethod
    def from_generator(cls, gen: np.ndarray, name: str = "") -> "LinearCode":
        return cls(gf2_nullspace(np.asarray(gen, np.uint8)), name)

    @classmethod
    def hamming(cls, r: int) -> "LinearCode":
        """[2^r - 1, 2^r - 1 - r, 3]; column i is the binary expansion of i."""
        n = (1 << r) - 1
        cols = [[(i >> (r - 1 - b)) & 1 for b in range(r)] for i in range(1, n + 1)]
        return cls(np.array(cols, dtype=np.uint8).T, f"hamming({r})")

    @classmethod
    def repetition(cls, n: int) -> "LinearCode":
        return cls.from_generator(np.ones((1, n), np.uint8), f"repetition({n})")

    @classmethod
    def bch(cls, mdeg: int, t: int) -> "LinearCode":
        """Narrow-sense primitive BCH code of length 2^mdeg - 1, design distance 2t+1."""
        g = bch_generator(mdeg, t)
        n = (1 << mdeg) - 1
        deg = g.bit_length() - 1
        k = n - deg
        gbits = [(g >> (deg - i)) & 1 for i in range(deg + 1)]
        gen = np.zeros((k, n), dtype=np.uint8)
        for i in range(k):
            gen[i, i:i + deg + 1] = gbits
        return cls.from_generator(gen, f"bch({n},{k})")

    @classmethod
    def random(cls, n: int, k: int, target_d: int, seed: int = 0,
               budget: int = 100_000) -> "LinearCode":
        """Seeded random systematic [I | P] code; first draw meeting target_d wins."""
        rng = np.random.default_rng(np.random.SeedSequence([seed, n, k, target_d]))
        r = n - k
        best = 0
        for _ in range(budget):
            p = rng.integers(0, 2, size=(k, r), dtype=np.uint8)
            hmat = np.concatenate([p.T, np.eye(r, dtype=np.uint8)], axis=1)
            words = _span_ints(np.concatenate([np.eye(k, dtype=np.uint8), p], axis=1))
            d = int(np.bitwise_count(words[1:]).min())
            if d >= target_d:
                return cls(hmat, f"random({n},{k})")
            best = max(best, d)
        raise CodeSearchError(f"no [{n},{k}] code with d >= {target_d} in budget; best {best}", best)


def bch_generator(mdeg: int, t: int) -> int:
    """lcm of the minimal polynomials of a, a^3, ..., a^(2t-1) as a bit mask.

    ``a`` is the class of x in the package's GF(2^mdeg); its modulus must be
    primitive, which holds for the tabulated moduli of degrees 3, 4, 5.
    """
    spec = gf_field(mdeg)
    order = (1 << mdeg) - 1
    seen: set[int] = set()
    gen = [1]  # coefficients over GF(2^mdeg), lowest degree first
    alpha = 2
    for e in range(1, 2 * t, 2):
        e %= order
        if e in seen:
            continue
        coset, c = [], e
        while c not in coset:
            coset.append(c)
            c = (2 * c) % order
        seen.update(coset)
        for c in coset:
            root = 1
            for _ in range(c):
                root = spec.mul(root, alpha)
            # gen *= (x + root)
            shifted = [0] + gen
            scaled = [spec.mul(root, g) for g in gen] + [0]
            gen = [u ^ v for u, v in zip(shifted, scaled)]
    if any(c > 1 for c in gen):
        raise AssertionError("generator coefficients must lie in GF(2)")
    return sum(c << i for i, c in enumerate(gen))


# --------------------------------------------------------------------------
# syndrome family

# (block length, dimension) of the base codes, ordered by redundancy
PRESET_BLOCKS = ((7, 4), (15, 11), (31, 26), (31, 21), (15, 7), (31, 16),
                 (15, 5), (31, 11), (15, 1))


@functools.lru_cache(maxsize=None)
def preset_code(b: int, k: int) -> LinearCode:
    if k == 1:
        return LinearCode.repetition(b)
    if (b, k) == (7, 4):
        return LinearCode.hamming(3)
    mdeg = (b + 1).bit_length() - 1
    for t in range(1, b):
        code = LinearCode.bch(mdeg, t)
        if code.k == k:
            return code
        if code.k < k:
            break
    raise ValueError(f"no preset code [{b},{k}]")


def choose_block_code(delta_tolerance: float, margin: float = 3.0) -> LinearCode:
    """Lowest-redundancy preset whose per-block radius covers margin * delta."""
    best = None
    for b, k in PRESET_BLOCKS:
        code = preset_code(b, k)
        if code.decode_radius / code.n >= margin * delta_tolerance:
            if best is None or code.redundancy / code.n < best.redundancy / best.n:
                best = code
    if best is None:
        raise ValueError(f"no preset tolerates error fraction {delta_tolerance}")
    return best


@dataclass(frozen=True, eq=False)
class SyndromeFamily:
    """Block-diagonal codes C_j: ``blocks`` copies of a base code, each with a
    column permutation derived from (seed, j).  All members share n' and k'.
    """

    base: LinearCode
    blocks: int
    seed: int = 0
    permute: bool = True

    INDEX_BITS = 64

    @property
    def length(self) -> int:
        return self.base.n * self.blocks

    @property
    def dimension(self) -> int:
        return self.base.k * self.blocks

    @property
    def syndrome_len(self) -> int:
        return self.base.redundancy * self.blocks

    @property
    def decode_radius(self) -> int:
        """Guaranteed: any pattern of this weight or less is corrected."""
        return self.base.decode_radius

    @classmethod
    def for_length(cls, expected_len: int, delta_tolerance: float, seed: int = 0) -> "SyndromeFamily":
        base = choose_block_code(delta_tolerance)
        return cls(base, max(1, -(-expected_len // base.n)), seed)

    @classmethod
    def fixed(cls, code: LinearCode) -> "SyndromeFamily":
        return cls(code, 1, 0, permute=False)

    def sample_index(self, rng: np.random.Generator) -> int:
        return int.from_bytes(rng.bytes(self.INDEX_BITS // 8), "big")

    def permutations(self, j: int) -> np.ndarray:
        if not self.permute:
            return np.tile(np.arange(self.base.n), (self.blocks, 1))
        rng = np.random.default_rng(np.random.SeedSequence([self.seed, j]))
        return np.array([rng.permutation(self.base.n) for _ in range(self.blocks)])

    def _blocks(self, y: np.ndarray, j: int) -> np.ndarray:
        perm = self.permutations(j)
        blk = y.reshape(self.blocks, self.base.n)
        return np.take_along_axis(blk, perm, axis=1)

    def syndrome(self, j: int, y) -> tuple[np.ndarray, np.ndarray]:
        """(syndrome bits, verbatim tail) under the zero-pad / split convention."""
        y = np.asarray(y, dtype=np.uint8)
        head, tail = y[:self.length], y[self.length:].copy()
        padded = np.zeros(self.length, np.uint8)
        padded[:head.size] = head
        s = self.base.syndrome_int(self._blocks(padded, j))
        r = self.base.redundancy
        bits = ((s[:, None] >> np.arange(r - 1, -1, -1)) & 1).astype(np.uint8)
        return bits.ravel(), tail

    def syndrome_bits(self, j: int, y) -> np.ndarray:
        s, tail = self.syndrome(j, y)
        return np.concatenate([s, tail])

    def decode(self, j: int, y_noisy, s_bits) -> np.ndarray | None:
        """The word of len(y_noisy) within the per-block radius of y_noisy whose
        syndrome (plus verbatim tail) is ``s_bits``; None on failure."""
        y_noisy = np.asarray(y_noisy, dtype=np.uint8)
        s_bits = np.asarray(s_bits, dtype=np.uint8)
        ylen = y_noisy.size
        tail_len = max(0, ylen - self.length)
        if s_bits.size != self.syndrome_len + tail_len:
            return None
        tail = s_bits[self.syndrome_len:]
        r = self.base.redundancy
        weights = 1 << np.arange(r - 1, -1, -1, dtype=np.int64)
        s_int = s_bits[:self.syndrome_len].reshape(self.blocks, r).astype(np.int64) @ weights
        padded = np.zeros(self.length, np.uint8)
        head = y_noisy[:self.length]
        padded[:head.size] = head
        perm = self.permutations(j)
        blk = np.take_along_axis(padded.reshape(self.blocks, self.base.n), perm, axis=1)
        fixed, ok = self.base.correct(blk, s_int)
        if not ok.all():
            return None
        out = np.empty_like(fixed)
        np.put_along_axis(out, perm, fixed, axis=1)
        out = out.ravel()
        if out[head.size:].any():
            return None  # corrected into the zero padding
        return np.concatenate([out[:head.size], tail])
