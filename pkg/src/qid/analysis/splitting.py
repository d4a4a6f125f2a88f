"""Entropy splitting: a witness index V whose X_V keeps about half the pairwise entropy.

Given X_1..X_m and side information Z such that every pair (X_i, X_j) has
eps-smooth min-entropy at least alpha given Z, the witness V marks, for each
outcome, the first index whose conditional probability reaches 2^(-alpha/2).
For an independent W with Hmin(W) >= 1, X_W then has at least
alpha/2 - log m - 1 bits of 2m*eps-smooth min-entropy given (V, W, Z) on the
event V != W.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .entropy import JointDistribution, hmin_smooth

TOL = 1e-12


def _table(dist: JointDistribution, xs, z):
    """P as an array (x_1, ..., x_m, z); z axis of size one when absent."""
    names = list(xs) + ([z] if z else [])
    p = dist.marginal(names).probs
    return p if z else p[..., None]


def split_witness(dist: JointDistribution, alpha: float, xs, z=None) -> np.ndarray:
    """V(x_1..x_m, z) in 1..m for every atom, per the ordered first-hit rule.

    V = j for the smallest j <= m-1 with P(x_i|z) < 2^(-alpha/2) for all i < j
    and P(x_j|z) >= 2^(-alpha/2); V = m when no such j exists.
    """
    p = _table(dist, xs, z)
    m = len(xs)
    pz = p.reshape(-1, p.shape[-1]).sum(axis=0)
    threshold = 2.0 ** (-alpha / 2)
    v = np.full(p.shape, m, dtype=np.int64)
    undecided = np.ones(p.shape, dtype=bool)
    for j in range(m - 1):
        others = tuple(k for k in range(m) if k != j)
        pj = p.sum(axis=others)                      # (a_j, z)
        with np.errstate(invalid="ignore", divide="ignore"):
            cond = np.where(pz > 0, pj / pz, 0.0)
        shape = [1] * m + [p.shape[-1]]
        shape[j] = p.shape[j]
        hit = np.broadcast_to((cond >= threshold).reshape(shape), p.shape)
        v[undecided & hit] = j + 1
        undecided &= ~hit
    return v


@dataclass(frozen=True)
class SplitReport:
    applicable: bool
    holds: bool
    value: float
    bound: float
    note: str = ""

    @property
    def margin(self) -> float:
        return self.value - self.bound


def pairwise_entropy(dist: JointDistribution, xs, z, eps: float) -> float:
    """min over i < j of Hmin^eps(X_i X_j | Z)."""
    given = [z] if z else []
    return min(hmin_smooth(dist, [a, b], given, eps) for a, b in itertools.combinations(xs, 2))


def split_joint(dist: JointDistribution, alpha: float, w_probs, xs, z=None):
    """Joint table of (X_W, V, W, Z) restricted to V != W, and P[V != W].

    X_W values are indexed up to the largest X alphabet; V and W are 0-based
    along their axes.
    """
    p = _table(dist, xs, z)
    m = len(xs)
    v = split_witness(dist, alpha, xs, z)
    amax = max(p.shape[:m])
    out = np.zeros((amax, m, m, p.shape[-1]))
    idx = np.indices(p.shape)
    flat_v = v.ravel() - 1
    flat_z = idx[-1].ravel()
    flat_p = p.ravel()
    for w in range(m):
        flat_xw = idx[w].ravel()
        keep = flat_v != w
        np.add.at(out, (flat_xw[keep], flat_v[keep], w, flat_z[keep]), w_probs[w] * flat_p[keep])
    return out, float(out.sum())


def verify_entropy_splitting(dist: JointDistribution, alpha: float, eps: float, w_probs,
                             xs=None, z=None) -> SplitReport:
    """Check Hmin^{2m eps}(X_W | V W Z, V != W) >= alpha/2 - log m - 1 exactly."""
    xs = list(xs) if xs is not None else [n for n in dist.names if n != z]
    m = len(xs)
    w_probs = np.asarray(w_probs, dtype=float)
    bound = alpha / 2 - math.log2(m) - 1
    if w_probs.size != m or abs(w_probs.sum() - 1) > TOL or (w_probs < 0).any():
        raise ValueError("W must be a distribution over the m indices")
    if w_probs.max() > 0.5 + TOL:
        return SplitReport(False, False, math.nan, bound, "Hmin(W) < 1")
    pair = pairwise_entropy(dist, xs, z, eps)
    if pair < alpha - 1e-9:
        return SplitReport(False, False, math.nan, bound, f"pairwise entropy {pair:.6g} < alpha")
    smooth = 2 * m * eps
    if smooth >= 1:
        return SplitReport(False, False, math.nan, bound, "2m*eps >= 1")
    joint, mass = split_joint(dist, alpha, w_probs, xs, z)
    if mass <= TOL:
        return SplitReport(False, False, math.nan, bound, "P[V != W] = 0")
    value = hmin_smooth((joint / mass).reshape(joint.shape[0], -1), eps=smooth)
    return SplitReport(True, value >= bound - 1e-9, value, bound)
