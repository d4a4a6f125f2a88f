"""Randomised verification sweeps over the analysis oracles.

Each sweep returns a ``SweepResult`` whose rows carry (instance id, inputs,
value, bound, margin); ``margin >= 0`` means the instance passed.  The
``--quick`` suite uses reduced instance counts with the same generators.
"""

from __future__ import annotations

import csv
import itertools
import json
import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import hash_audits
from .bounds import sigma, uncertainty_bound
from .entropy import (JointDistribution, hmin_smooth, smoothed_guessing_grid,
                      smoothed_guessing_lp, smoothed_guessing_probability)
from .privacy import HashFamily, pa_bound, pa_exact_distance, random_source
from .quantum import DensityMatrix, exact_measurement_entropy, haar_state, markov_decompose_check
from .splitting import pairwise_entropy, split_witness, verify_entropy_splitting

GRID_STEP = 1e-3


@dataclass
class SweepResult:
    name: str
    rows: list = field(default_factory=list)
    skipped: int = 0
    seconds: float = 0.0

    def add(self, inputs: dict, value: float, bound: float, margin: float | None = None):
        margin = value - bound if margin is None else margin
        self.rows.append({"sweep": self.name, "instance": len(self.rows),
                          "inputs": json.dumps(inputs, sort_keys=True),
                          "value": value, "bound": bound, "margin": margin})

    @property
    def failures(self) -> list:
        return [r for r in self.rows if not r["margin"] >= -1e-9]

    @property
    def passed(self) -> bool:
        return not self.failures

    def summary(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        extra = f", {self.skipped} not applicable" if self.skipped else ""
        return (f"{status} {self.name}: {len(self.rows)} checks, {len(self.failures)} failures"
                f"{extra} ({self.seconds:.1f}s)")


def write_csv(results, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, ["sweep", "instance", "inputs", "value", "bound", "margin"])
        w.writeheader()
        for res in results:
            w.writerows(res.rows)


def _timed(fn):
    def run(*args, **kw):
        t0 = time.perf_counter()
        res = fn(*args, **kw)
        res.seconds = time.perf_counter() - t0
        return res
    run.__name__ = fn.__name__
    run.__doc__ = fn.__doc__
    return run


# --------------------------------------------------------------------------

def check_smoothing(res: SweepResult, p: np.ndarray, eps: float, tag: dict, grid: bool = True):
    """Water-filling against the LP and, for few columns, the grid oracle."""
    wf = smoothed_guessing_probability(p, eps)
    lp = smoothed_guessing_lp(p, eps)
    res.add({**tag, "oracle": "lp", "eps": eps}, -abs(wf - lp), -1e-9)
    if grid:
        g = smoothed_guessing_grid(p, eps, GRID_STEP)
        slack = p.shape[1] * GRID_STEP
        # water-filling is optimal, so it can only beat the grid, by at most the slack
        res.add({**tag, "oracle": "grid", "eps": eps}, min(g - wf, slack - (wf - g)) + 1e-12, 0.0)


@_timed
def sweep_smooth_entropy(count: int = 300, seed: int = 1) -> SweepResult:
    """Water-filling equals the LP and grid oracles; monotone in eps."""
    res = SweepResult("smooth_entropy")
    rng = np.random.default_rng(seed)
    for i in range(count):
        nx, ny = int(rng.integers(1, 7)), int(rng.integers(1, 4))
        p = random_source(nx, ny, rng, float(rng.choice([0.2, 1.0, 5.0])))
        eps = float(rng.choice([0.0, 0.01, 0.05, 0.1, 0.3]))
        check_smoothing(res, p, eps, {"i": i, "nx": nx, "ny": ny})
        res.add({"i": i, "check": "monotone"},
                hmin_smooth(p, eps=min(eps + 0.05, 0.99)), hmin_smooth(p, eps=eps))
    return res


def _random_split_instance(rng):
    m = int(rng.integers(2, 4))
    shape = tuple(int(a) for a in rng.integers(2, 5, size=m)) + (int(rng.integers(1, 5)),)
    names = tuple(f"X{i + 1}" for i in range(m)) + ("Z",)
    dist = JointDistribution.random(shape, names, rng, float(rng.choice([0.3, 1.0, 3.0])))
    return dist, list(names[:-1]), m


def _w_law(rng, m):
    w = rng.dirichlet(np.ones(m))
    return w if w.max() <= 0.5 else np.full(m, 1.0 / m)


@_timed
def sweep_entropy_splitting(count: int = 1000, seed: int = 2, grid_checks: bool = True) -> SweepResult:
    """Random and boundary-atom instances of the splitting bound."""
    res = SweepResult("entropy_splitting")
    rng = np.random.default_rng(seed)
    for i in range(count):
        dist, xs, m = _random_split_instance(rng)
        eps = float(rng.choice([0.0, 0.05]))
        alpha = pairwise_entropy(dist, xs, "Z", eps)
        if rng.random() < 0.3:
            alpha *= float(rng.uniform(0.3, 1.0))    # slack below the best alpha
        if grid_checks and eps > 0:
            a, b = xs[:2]
            check_smoothing(res, dist.matrix([a, b], ["Z"]), eps, {"i": i, "pair": "X1X2"})
        rep = verify_entropy_splitting(dist, alpha, eps, _w_law(rng, m), xs, "Z")
        if not rep.applicable:
            res.skipped += 1
            continue
        res.add({"i": i, "m": m, "shape": dist.alphabets, "eps": eps, "alpha": alpha},
                rep.value, rep.bound)
    for j, (dist, xs, alpha) in enumerate(boundary_instances(rng, max(count // 10, 20))):
        m = len(xs)
        rep = verify_entropy_splitting(dist, alpha, 0.0, np.full(m, 1.0 / m), xs, "Z")
        if not rep.applicable:
            res.skipped += 1
            continue
        res.add({"boundary": j, "m": m, "alpha": alpha}, rep.value, rep.bound)
    return res


def boundary_instances(rng, count: int):
    """Distributions with some conditional probability exactly 2^(-alpha/2).

    Dyadic tables (entries multiples of 1/16) with alpha chosen as the largest
    value -2 log2 c, c a power-of-two conditional atom, that still satisfies
    the pairwise precondition; plus i.i.d. uniform blocks where every atom
    sits on the threshold.
    """
    out = []
    for m, k in itertools.product((2, 3), (1, 2)):
        size = 1 << k
        p = np.full((size,) * m + (1,), 1.0 / size ** m)
        names = tuple(f"X{i + 1}" for i in range(m)) + ("Z",)
        out.append((JointDistribution(names, p), list(names[:-1]), 2.0 * k))
    tries = 0
    while len(out) < count and tries < 50 * count:
        tries += 1
        m = int(rng.integers(2, 4))
        shape = tuple(int(a) for a in rng.integers(2, 4, size=m)) + (int(rng.integers(1, 3)),)
        cells = int(np.prod(shape))
        counts = rng.multinomial(16, np.ones(cells) / cells).reshape(shape)
        p = counts / 16.0
        names = tuple(f"X{i + 1}" for i in range(m)) + ("Z",)
        dist = JointDistribution(names, p)
        xs = list(names[:-1])
        pair = pairwise_entropy(dist, xs, "Z", 0.0)
        pz = p.reshape(-1, shape[-1]).sum(axis=0)
        cands = []
        for j in range(m - 1):
            pj = p.sum(axis=tuple(a for a in range(m) if a != j))
            for c in (pj / np.where(pz > 0, pz, 1))[..., pz > 0].ravel():
                if 0 < c < 1 and math.log2(c).is_integer():
                    cands.append(-2 * math.log2(c))
        cands = [a for a in cands if a <= pair + 1e-12]
        if cands:
            out.append((dist, xs, max(cands)))
    return out


@_timed
def sweep_privacy_amplification(count: int = 100, seed: int = 3) -> SweepResult:
    """Exact enumerated distance never exceeds the bound at q = 0."""
    res = SweepResult("privacy_amplification")
    rng = np.random.default_rng(seed)
    point = np.zeros(8)
    point[5] = 1.0
    d = pa_exact_distance(point, HashFamily(3, 1, masked=True))
    res.add({"anchor": "deterministic"}, -abs(d - 0.5), -1e-12)
    res.add({"anchor": "bound"}, -abs(pa_bound(0, 0, 0, 1) - 2 ** 0.5 / 2), -1e-12)
    d = pa_exact_distance(np.full(16, 1 / 16), HashFamily(4, 3, masked=True, nonzero=True))
    res.add({"anchor": "masked_uniform"}, -abs(d), -1e-12)
    for i in range(count):
        deg = int(rng.integers(2, 6))
        ell = int(rng.integers(1, deg + 1))
        fam = HashFamily(deg, ell, bool(rng.integers(2)), bool(rng.integers(2)))
        p = random_source(1 << deg, int(rng.integers(1, 4)), rng, float(rng.choice([0.1, 1.0, 10.0])))
        eps = float(rng.choice([0.0, 0.02, 0.1]))
        bound = pa_bound(hmin_smooth(p, eps=eps), eps, 0, ell)
        res.add({"i": i, "degree": deg, "ell": ell, "masked": fam.masked, "nonzero": fam.nonzero,
                 "eps": eps}, bound, pa_exact_distance(p, fam))
    return res


@_timed
def sweep_uncertainty(count: int = 1000, seed: int = 4, max_n: int = 4) -> SweepResult:
    """Exact Hmin^eps(X|Theta) of random states against (1/2 - 2 lam) n.

    At these n the smoothing parameter is close to one, so the check is a
    weak-regime validity test, not a tightness test.
    """
    res = SweepResult("uncertainty")
    rng = np.random.default_rng(seed)
    lams = (0.01, 0.05, 0.1, 0.2)
    for n in (2, 3):
        psi = np.zeros(1 << n)
        psi[0] = 1
        value = exact_measurement_entropy(psi)[0]
        res.add({"product": n}, -abs(value - n * math.log2(4 / 3)), -1e-9)
    for i in range(count):
        n = int(rng.integers(1, max_n + 1))
        psi = haar_state(n, rng)
        for lam in lams:
            bound, eps = uncertainty_bound(n, lam)
            value = exact_measurement_entropy(psi, eps)[1]
            res.add({"i": i, "n": n, "lam": lam, "eps": eps, "regime": "weak"}, value, bound)
    grid = np.linspace(1e-4, 0.25, 1000)
    s = np.array([sigma(v) for v in grid])
    steps = np.diff(s)
    res.add({"check": "sigma_increasing"}, float(steps.min()), 0.0, 1.0 if (steps > 0).all() else -1.0)
    return res


def random_cq_instance(rng, independent: bool):
    nx, ny, de = int(rng.integers(1, 4)), int(rng.integers(1, 4)), int(rng.integers(1, 3))
    p = random_source(nx, ny, rng)
    if independent:
        event = np.full((nx, ny), float(rng.uniform(0.1, 0.9)))
    else:
        event = (rng.random((nx, ny)) < 0.5).astype(float)
        event.flat[int(rng.integers(event.size))] = 1.0
        if event.all():
            event.flat[int(rng.integers(event.size))] = 0.0 if event.size > 1 else 1.0
    rho = [DensityMatrix.random(de, rng).data for _ in range(ny)]
    return p, event, rho


@_timed
def sweep_markov(count: int = 100, seed: int = 5) -> SweepResult:
    """Both decomposition identities, tau PSD with unit trace."""
    res = SweepResult("markov_decomposition")
    rng = np.random.default_rng(seed)
    for i in range(count):
        for independent in (False, True):
            p, event, rho = random_cq_instance(rng, independent)
            rep = markov_decompose_check(p, event, rho)
            worst = max(rep.identity_residual, rep.tau_form_residual, rep.split_residual or 0.0,
                        abs(rep.tau_trace - 1), max(0.0, -rep.tau_min_eig))
            res.add({"i": i, "independent": independent, "p": rep.p_event}, -worst, -1e-9)
    return res


@_timed
def sweep_mac(max_t: int = 10, degree: int = 10) -> SweepResult:
    """Exhaustive forgery probability and extractor distance of the tag."""
    res = SweepResult("mac_audit")
    audit = hash_audits.mac_forgery_audit(4, 2)
    res.add({"degree": 4, "ell": 2, "kind": "impersonation"}, audit.bound, audit.impersonation)
    res.add({"degree": 4, "ell": 2, "kind": "substitution"}, audit.bound, audit.substitution)
    rng = np.random.default_rng(6)
    for ell in (1, 2, 3):
        for t in range(ell, max_t + 1):
            for support in (np.arange(1 << t), rng.choice(1 << degree, 1 << t, replace=False)):
                dist = hash_audits.mac_extractor_distance(degree, ell, support)
                res.add({"t": t, "ell": ell}, hash_audits.extractor_bound(t, ell), dist)
    return res


def run_suite(quick: bool = False):
    """All sweeps; quick mode trims instance counts."""
    if quick:
        return [sweep_smooth_entropy(60), sweep_entropy_splitting(150), sweep_privacy_amplification(30),
                sweep_uncertainty(150), sweep_markov(30), sweep_mac(8)]
    return [sweep_smooth_entropy(), sweep_entropy_splitting(), sweep_privacy_amplification(),
            sweep_uncertainty(), sweep_markov(), sweep_mac()]


