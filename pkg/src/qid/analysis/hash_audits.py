"""Exhaustive audits of the hash families at enumerable field sizes.

Everything here enumerates the full key space with the field's
multiplication table, so results are exact rationals (as floats).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..gf2 import field
from ..hashing import bits_needed


def _truncated_table(degree: int, ell: int) -> np.ndarray:
    """T[a, y] = first ell bits of a*y in GF(2^degree)."""
    return field(degree).mul_table() >> (degree - ell)


def f_collision_audit(degree: int, ell: int) -> float:
    """max over y != y' of Pr_a[f_a(y) = f_a(y')], domain = all degree-bit inputs."""
    t = _truncated_table(degree, ell)
    q = t.shape[0]
    worst = 0.0
    for y in range(q):
        eq = (t[:, y][:, None] == t[:, y + 1:])
        if eq.size:
            worst = max(worst, float(eq.mean(axis=0).max()))
    return worst


def g_pair_distribution(m: int, ell: int, w1: int, w2: int) -> np.ndarray:
    """Exact joint law of (g(w1), g(w2)) over all keys, as a 2^ell x 2^ell table."""
    deg = max(bits_needed(m), ell)
    t = _truncated_table(deg, ell)
    counts = np.zeros((1 << ell, 1 << ell))
    for a in range(1 << deg):
        u, v = t[a, w1 - 1], t[a, w2 - 1]
        for b in range(1 << ell):
            counts[u ^ b, v ^ b] += 1
    return counts / counts.sum()


@dataclass(frozen=True)
class MacAudit:
    degree: int
    tag_len: int
    impersonation: float
    substitution: float
    worst_single_flip_keys: int

    @property
    def bound(self) -> float:
        return 2.0 ** -self.tag_len

    @property
    def holds(self) -> bool:
        return self.impersonation <= self.bound + 1e-15 and self.substitution <= self.bound + 1e-15


def mac_forgery_audit(degree: int, ell: int) -> MacAudit:
    """Enumerate every key (alpha, beta) and every message pair.

    impersonation = max_{msg,tag} Pr_k[tag is valid for msg]
    substitution  = max_{msg,tag,msg'!=msg,tag'} Pr_k[tag' valid for msg' | tag valid for msg]
    worst_single_flip_keys = max over messages and single-bit flips of the
    number of nonzero alpha (any beta) for which the old tag still verifies.
    """
    t = _truncated_table(degree, ell)
    q, nt = t.shape[0], 1 << ell
    betas = np.arange(nt)
    # tags[alpha, beta, msg]
    tags = t[:, None, :] ^ betas[None, :, None]
    flat = tags.reshape(q * nt, q)
    nkeys = flat.shape[0]
    imp = max(np.bincount(flat[:, x], minlength=nt).max() for x in range(q)) / nkeys
    sub = 0.0
    for x in range(q):
        for x2 in range(q):
            if x == x2:
                continue
            joint = np.zeros((nt, nt))
            np.add.at(joint, (flat[:, x], flat[:, x2]), 1)
            rows = joint.sum(axis=1)
            ok = rows > 0
            sub = max(sub, float((joint[ok].max(axis=1) / rows[ok]).max()))
    flips = 0
    nz = tags[1:]
    for x in range(q):
        for bit in range(degree):
            x2 = x ^ (1 << bit)
            still = np.count_nonzero(nz[:, :, x] == nz[:, :, x2])
            flips = max(flips, still)
    return MacAudit(degree, ell, float(imp), sub, flips)


def mac_extractor_distance(degree: int, ell: int, support) -> float:
    """Exact distance of (tag, key) from (uniform, key) for X uniform on ``support``.

    The mask beta shifts every tag by a key-known constant, so the distance
    equals the average over alpha of the distance of first_ell(alpha*X) from
    uniform.  Any classical side information that is fixed (independent of X)
    leaves this number unchanged.
    """
    t = _truncated_table(degree, ell)
    support = np.asarray(support, dtype=np.int64)
    nt = 1 << ell
    total = 0.0
    for a in range(t.shape[0]):
        p = np.bincount(t[a, support], minlength=nt) / support.size
        total += 0.5 * np.abs(p - 1.0 / nt).sum()
    return total / t.shape[0]


def extractor_bound(t: float, ell: int) -> float:
    return 0.5 * 2.0 ** (-(t - ell) / 2)
