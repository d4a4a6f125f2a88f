"""Classical (conditional, smooth) min-entropy of finite joint distributions.

The smoothing optimum is computed by water-filling.  Removing mass from a
column y to bring its maximum down to level c costs sum_x max(0, P(x,y) - c);
the cost is piecewise linear and convex in c, with slope equal to the number
of atoms above c.  Spending the budget on the cheapest slopes first across
all columns is therefore optimal.  Two independent oracles are kept for
cross-checking: a linear program and a budget-grid dynamic program.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import reduce
from typing import Sequence

import numpy as np
from scipy.optimize import linprog

MAX_ATOMS = 1 << 20
SUM_TOL = 1e-12


@dataclass(frozen=True)
class JointDistribution:
    """Dense probability table over named finite variables.

    Parameters
    ----------
    names : tuple of str
        Variable names, one per table axis.
    probs : ndarray
        Nonnegative entries summing to one; axis k indexes ``names[k]``.
    """

    names: tuple
    probs: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        object.__setattr__(self, "probs", p)
        object.__setattr__(self, "names", tuple(self.names))
        if p.ndim != len(self.names):
            raise ValueError("one table axis per variable")
        if len(set(self.names)) != len(self.names):
            raise ValueError("duplicate variable names")
        if p.size > MAX_ATOMS:
            raise ValueError("product alphabet larger than 2^20")
        if (p < 0).any():
            raise ValueError("negative probability")
        if abs(p.sum() - 1.0) > SUM_TOL:
            raise ValueError(f"probabilities sum to {p.sum()!r}")

    @classmethod
    def from_table(cls, table, names: Sequence[str]) -> "JointDistribution":
        return cls(tuple(names), np.asarray(table, dtype=float))

    @classmethod
    def random(cls, shape, names, rng, concentration: float = 1.0) -> "JointDistribution":
        p = rng.dirichlet(np.full(int(np.prod(shape)), concentration)).reshape(shape)
        return cls(tuple(names), p / p.sum())

    @property
    def alphabets(self) -> tuple:
        return self.probs.shape

    def _axes(self, names) -> list[int]:
        try:
            return [self.names.index(v) for v in names]
        except ValueError:
            missing = [v for v in names if v not in self.names]
            raise KeyError(f"unknown variables {missing}") from None

    def marginal(self, names: Sequence[str]) -> "JointDistribution":
        keep = self._axes(names)
        drop = tuple(i for i in range(len(self.names)) if i not in keep)
        p = self.probs.sum(axis=drop) if drop else self.probs
        # reorder to the requested order
        remaining = [i for i in range(len(self.names)) if i in keep]
        p = np.moveaxis(p, [remaining.index(k) for k in keep], range(len(keep)))
        return JointDistribution(tuple(names), p)

    def matrix(self, target: Sequence[str], given: Sequence[str] = ()) -> np.ndarray:
        """P as a |target| x |given| matrix (product alphabets flattened)."""
        target, given = list(target), list(given)
        if not target:
            raise ValueError("empty target set")
        if set(target) & set(given):
            raise ValueError("target and conditioning sets overlap")
        m = self.marginal(target + given).probs
        rows = int(np.prod(m.shape[:len(target)]))
        return m.reshape(rows, -1)


def _as_matrix(dist, target, given) -> np.ndarray:
    if isinstance(dist, JointDistribution):
        return dist.matrix(target, given)
    p = np.asarray(dist, dtype=float)
    return p.reshape(-1, 1) if p.ndim == 1 else p


def guessing_probability(p: np.ndarray) -> float:
    """sum_y max_x P(x, y) for a matrix with x along rows."""
    return float(p.max(axis=0).sum())


def hmin(dist, target: Sequence[str] = (), given: Sequence[str] = ()) -> float:
    """Conditional min-entropy -log2 sum_y max_x P(x, y).

    ``dist`` is a JointDistribution, or directly a probability vector or an
    (x, y) matrix, in which case ``target`` and ``given`` are ignored.
    """
    if isinstance(dist, JointDistribution) and not target:
        raise ValueError("empty target set")
    return -math.log2(guessing_probability(_as_matrix(dist, target, given)))


def smoothed_guessing_probability(p: np.ndarray, eps: float) -> float:
    """min over subnormalised Q <= P with mass(P - Q) <= eps of sum_y max_x Q.

    Water-filling over the column slopes.
    """
    if not 0 <= eps < 1:
        raise ValueError("smoothing parameter must lie in [0, 1)")
    cols = -np.sort(-p, axis=0)                      # each column descending
    k = cols.shape[0]
    nxt = np.vstack([cols[1:], np.zeros((1, cols.shape[1]))])
    widths = (cols - nxt).ravel(order="F")           # level drop available at slope i+1
    slopes = np.tile(np.arange(1, k + 1), cols.shape[1])
    order = np.argsort(slopes, kind="stable")
    budget = float(eps)
    lowered = 0.0
    for i in order:
        if budget <= 0:
            break
        w = widths[i]
        if w <= 0:
            continue
        take = min(w, budget / slopes[i])
        lowered += take
        budget -= take * slopes[i]
    return max(float(cols[0].sum()) - lowered, 0.0)


def hmin_smooth(dist, target: Sequence[str] = (), given: Sequence[str] = (), eps: float = 0.0) -> float:
    """eps-smooth conditional min-entropy (events of probability >= 1 - eps)."""
    if not 0 <= eps < 1:
        raise ValueError("smoothing parameter must lie in [0, 1)")
    p = _as_matrix(dist, target, given)
    if eps == 0:
        return -math.log2(guessing_probability(p))
    g = smoothed_guessing_probability(p, eps)
    return math.inf if g <= 0 else -math.log2(g)


# --------------------------------------------------------------------------
# oracles

def smoothed_guessing_lp(p: np.ndarray, eps: float) -> float:
    """Same optimum as ``smoothed_guessing_probability``, solved as an LP."""
    nx, ny = p.shape
    nr = nx * ny
    # variables: r (removed mass, row-major), then c_y
    cost = np.concatenate([np.zeros(nr), np.ones(ny)])
    a_ub, b_ub = [], []
    for x in range(nx):
        for y in range(ny):
            row = np.zeros(nr + ny)
            row[x * ny + y] = -1.0
            row[nr + y] = -1.0
            a_ub.append(row)
            b_ub.append(-p[x, y])                    # P - r <= c
    a_ub.append(np.concatenate([np.ones(nr), np.zeros(ny)]))
    b_ub.append(eps)
    bounds = [(0.0, float(v)) for v in p.ravel()] + [(0.0, None)] * ny
    res = linprog(cost, A_ub=np.array(a_ub), b_ub=np.array(b_ub), bounds=bounds, method="highs",
                  options={"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10})
    if not res.success:
        raise RuntimeError(res.message)
    return float(res.fun)


def _column_levels(col: np.ndarray, budgets: np.ndarray, steps: int = 100) -> np.ndarray:
    """For each budget, the lowest c with sum max(0, col - c) <= budget (bisection)."""
    lo = np.zeros(budgets.size)
    hi = np.full(budgets.size, float(col.max()))
    for _ in range(steps):
        mid = 0.5 * (lo + hi)
        ok = np.clip(col[None, :] - mid[:, None], 0, None).sum(axis=1) <= budgets
        hi = np.where(ok, mid, hi)
        lo = np.where(ok, lo, mid)
    return hi


def smoothed_guessing_grid(p: np.ndarray, eps: float, step: float = 1e-3) -> float:
    """Grid oracle: split the budget among columns in multiples of ``step``.

    Exact per-column levels by bisection, combined by a min-plus dynamic
    program over budget units.  Overestimates the optimum by at most
    (number of columns) * step.
    """
    units = int(math.floor(eps / step + 1e-9))
    budgets = np.arange(units + 1) * step
    u = np.arange(units + 1)
    spent = u[:, None] - u[None, :]                  # budget left for earlier columns
    best = np.zeros(units + 1)
    for y in range(p.shape[1]):
        level = _column_levels(p[:, y], budgets)
        cand = np.where(spent >= 0, best[np.clip(spent, 0, None)] + level[None, :], np.inf)
        best = cand.min(axis=1)
    return float(best[units])


def joint_of(*axes_probs) -> np.ndarray:
    """Outer product of independent marginals."""
    return reduce(np.multiply.outer, axes_probs)
