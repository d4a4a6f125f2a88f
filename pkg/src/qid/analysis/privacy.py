"""Privacy amplification: the closed-form bound and exact enumerated distances.

Families hash integer inputs below 2^degree with multiply-then-truncate over
GF(2^degree), optionally followed by an additive mask.  All are universal-2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..gf2 import field

MAX_WORK = 1 << 24


def pa_bound(hmin_eps: float, eps: float, q: float, ell: float) -> float:
    """1/2 * 2^(-(H - q - ell)/2) + 2 eps."""
    return 0.5 * 2.0 ** (-0.5 * (hmin_eps - q - ell)) + 2 * eps


@dataclass(frozen=True)
class HashFamily:
    """Enumerable universal-2 family.

    Parameters
    ----------
    degree : int
        Field degree; inputs are integers below 2^degree.
    ell : int
        Output length, at most ``degree``.
    masked : bool
        Add a uniform ell-bit mask b to the truncated product.
    nonzero : bool
        Exclude the zero multiplier.
    """

    degree: int
    ell: int
    masked: bool = False
    nonzero: bool = False

    def __post_init__(self):
        if not 1 <= self.ell <= self.degree:
            raise ValueError("need 1 <= ell <= degree")

    @property
    def multipliers(self) -> np.ndarray:
        return np.arange(1 if self.nonzero else 0, 1 << self.degree)

    @property
    def size(self) -> int:
        return self.multipliers.size * ((1 << self.ell) if self.masked else 1)

    def table(self) -> np.ndarray:
        """out[key, x]; keys enumerate (a, b) with b varying fastest."""
        mt = field(self.degree).mul_table()[self.multipliers] >> (self.degree - self.ell)
        if not self.masked:
            return mt
        masks = np.arange(1 << self.ell)
        return (mt[:, None, :] ^ masks[None, :, None]).reshape(-1, mt.shape[1])


def pa_exact_distance(p_xz, family: HashFamily) -> float:
    """Exact TV distance of (F(X), F, Z) from (U, F, Z), F uniform over the family.

    ``p_xz`` has x along rows (x < 2^degree) and z along columns; a vector is
    read as a single column.
    """
    p = np.asarray(p_xz, dtype=float)
    p = p.reshape(-1, 1) if p.ndim == 1 else p
    nx, nz = p.shape
    if nx > 1 << family.degree:
        raise ValueError("input alphabet larger than the field")
    if nx * family.size * (1 << family.ell) > MAX_WORK:
        raise ValueError("instance too large to enumerate")
    out = family.table()[:, :nx]
    keys = out.shape[0]
    pz = p.sum(axis=0)
    total = 0.0
    for k in range(keys):
        dist = np.zeros((1 << family.ell, nz))
        np.add.at(dist, out[k], p)
        total += 0.5 * np.abs(dist - pz[None, :] / (1 << family.ell)).sum()
    return total / keys


def collision_probability(family: HashFamily) -> float:
    """max over x != x' of Pr_F[F(x) = F(x')], by enumeration."""
    t = family.table()
    worst = 0.0
    for x in range(1, t.shape[1]):
        eq = (t[:, :x] == t[:, x:x + 1]).mean(axis=0)
        worst = max(worst, float(eq.max()))
    return worst


def random_source(nx: int, nz: int, rng, concentration: float = 1.0) -> np.ndarray:
    return rng.dirichlet(np.full(nx * nz, concentration)).reshape(nx, nz)


def log2_or_inf(v: float) -> float:
    return math.log2(v) if v > 0 else -math.inf
