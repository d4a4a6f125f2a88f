"""Closed-form security bounds as reproducible reports.

Every report stores its inputs, each error term separately (as an exponent
and as a value) and feasibility flags.  Reports are pure functions of their
inputs; ``BoundReport.recompute`` re-evaluates from the stored inputs.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

from .binary_entropy import h_inverse

LOG2E = math.log2(math.e)
FAMILY_BIAS_CAVEAT = ("syndrome closeness assumes a small-bias code family; the concrete "
                      "block code family used here carries no such guarantee")


def sigma(lam: float) -> float:
    """lam^2 log2(e) / (32 (2 - log2 lam)^2)."""
    if lam <= 0:
        raise ValueError("lambda must be positive")
    return lam * lam * LOG2E / (32.0 * (2.0 - math.log2(lam)) ** 2)


def uncertainty_bound(n: int, lam: float) -> tuple[float, float]:
    """(entropy lower bound (1/2 - 2 lam) n, smoothing 2^(-sigma(lam) n))."""
    if lam <= 0:
        raise ValueError("lambda must be positive")
    return (0.5 - 2 * lam) * n, 2.0 ** (-sigma(lam) * n)


def mu_of(n: int, m: int) -> float:
    """h^{-1}(1 - log2(m)/n): the relative distance the basis code can reach."""
    return h_inverse(1 - math.log2(m) / n)


@dataclass(frozen=True)
class BoundReport:
    """One evaluated bound.

    ``exponents`` maps each error term to the argument a in 2^(-a) (or in
    negl(a) when ``asymptotic`` is set); ``terms`` holds 2^(-a) values.
    """

    formula: str
    inputs: dict
    derived: dict
    exponents: dict
    terms: dict = field(default_factory=dict)
    flags: dict = field(default_factory=dict)
    notes: tuple = ()

    @property
    def epsilon(self) -> float:
        return float(sum(self.terms.values()))

    @property
    def feasible(self) -> bool:
        return bool(self.flags.get("feasible", False))

    def to_json(self) -> str:
        d = asdict(self)
        d["epsilon"] = self.epsilon
        d["notes"] = list(self.notes)
        return json.dumps(_finite(d), sort_keys=True, allow_nan=False)

    def recompute(self) -> "BoundReport":
        return FORMULAS[self.formula](**self.inputs)


def _finite(v):
    """Non-finite floats become the strings "inf", "-inf" or "nan" for JSON."""
    if isinstance(v, dict):
        return {k: _finite(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_finite(x) for x in v]
    if isinstance(v, float) and not math.isfinite(v):
        return repr(v)
    return v


def _pow2neg(a: float) -> float:
    return 2.0 ** (-a) if a > -1000 else math.inf


def _terms(exps: dict) -> dict:
    return {k: _pow2neg(a) for k, a in exps.items()}


def _check_lambda(lam, hi=0.25):
    if not 0 < lam < hi:
        raise ValueError(f"lambda must lie in (0, {hi})")


def user_security_epsilon(d: float, m: int, q: float, ell: float, lam: float) -> BoundReport:
    """User security of Q-ID against a q-qubit server, basis code distance d.

    Reports the statement form and, in ``derived``, the variant that falls
    out of the proof (twice the privacy amplification error with a 4 m eps'
    smoothing term).
    """
    _check_lambda(lam)
    lm = math.log2(m)
    s = sigma(lam)
    exps = {"privacy": 0.5 * ((0.25 - lam) * d - lm - q - ell - 1), "smoothing": s * d - lm - 3}
    proof_pa = 0.5 * _pow2neg(0.5 * (d / 4 - lam * d - lm - 1 - q - ell))
    proof_eps = 2 * (proof_pa + 4 * m * _pow2neg(s * d))
    return BoundReport("user_security", dict(d=d, m=m, q=q, ell=ell, lam=lam),
                       {"sigma": s, "proof_variant_epsilon": proof_eps}, exps, _terms(exps),
                       {"feasible": all(a > 0 for a in exps.values())},
                       ("statement form; the proof form is reported as proof_variant_epsilon",))


def server_security_epsilon(m: int, ell: float) -> BoundReport:
    """m^2 / 2^ell: a wrong guess is accepted with at most this probability."""
    exps = {"guess": ell - 2 * math.log2(m)}
    return BoundReport("server_security", dict(m=m, ell=ell), {}, exps, _terms(exps),
                       {"feasible": exps["guess"] > 0})


def impersonation_epsilon(n: int, m: int, q: float, lam: float) -> BoundReport:
    """Q-ID against impersonation, with the code distance at the GV rate.

    mu = h^{-1}(1 - log m / n), d = n mu - 1 and
    ell = ((1/4 - lam) d + 3 log m - q - 1) / 3.
    """
    _check_lambda(lam)
    if m < 2 or m > 2 ** n:
        raise ValueError("need 2 <= m <= 2^n")
    lm = math.log2(m)
    mu = mu_of(n, m)
    d = n * mu - 1
    s = sigma(lam)
    ell = ((0.25 - lam) * d + 3 * lm - q - 1) / 3
    exps = {"privacy": ((0.25 - lam) * n * mu - 3 * lm - q - 2) / 3,
            "smoothing": s * n * mu - lm - 4}
    derived = {"mu": mu, "d": d, "ell": ell, "ell_int": math.floor(ell), "sigma": s,
               "server_term": _pow2neg(ell - 2 * lm)}
    flags = {"feasible": all(a > 0 for a in exps.values()) and ell > 0}
    return BoundReport("impersonation", dict(n=n, m=m, q=q, lam=lam), derived, exps,
                       _terms(exps), flags)


def qidplus_epsilon(n: int, m: int, q: float, lam: float, ell: float | None = None) -> BoundReport:
    """Exponent arguments for Q-ID+ (errors known only up to negl(.)).

    Default ell = floor(((1/4 - lam) d + log m - 2q) / 4).  Terms are
    reported as 2^(-arg) for orientation; absolute constants are not known.
    """
    _check_lambda(lam)
    if m < 2 or m > 2 ** n:
        raise ValueError("need 2 <= m <= 2^n")
    lm = math.log2(m)
    mu = mu_of(n, m)
    d = n * mu - 1
    s = sigma(lam)
    default_ell = math.floor(((0.25 - lam) * d + lm - 2 * q) / 4)
    ell = default_ell if ell is None else ell
    t = (0.25 - lam) * d - lm - 3 * ell
    exps = {"privacy": (0.25 - lam) * d - lm - 2 * q - 3 * ell,
            "smoothing": s * d - lm,
            "tag": float(ell),
            "syndrome": (t - 2 * q) / 4}
    derived = {"mu": mu, "d": d, "ell": ell, "default_ell": default_ell, "t": t, "sigma": s,
               "theorem_argument": (0.25 - lam) * mu * n - 7 * lm - 2 * q}
    flags = {"feasible": all(a > 0 for a in exps.values()), "asymptotic": True,
             "family_bias_caveat": True}
    return BoundReport("qidplus", dict(n=n, m=m, q=q, lam=lam, ell=ell), derived, exps,
                       _terms(exps), flags,
                       ("exponent arguments of negl(.) terms; absolute constants not given",
                        FAMILY_BIAS_CAVEAT))


def qkd_entropy_budget(n: int, m: int, q: float, lam: float, ell: float, leaked: float) -> BoundReport:
    """Bits left for key extraction after the tag, the syndrome and q qubits.

    budget = (1/4 - lam) d - log m - 1 - q - ell - leaked, d from the GV rate.
    """
    _check_lambda(lam)
    lm = math.log2(m)
    d = n * mu_of(n, m) - 1
    budget = (0.25 - lam) * d - lm - 1 - q - ell - leaked
    return BoundReport("qkd_budget", dict(n=n, m=m, q=q, lam=lam, ell=ell, leaked=leaked),
                       {"d": d, "budget": budget}, {}, {}, {"feasible": budget > 0})


FORMULAS = {"user_security": user_security_epsilon, "server_security": server_security_epsilon,
            "impersonation": impersonation_epsilon, "qidplus": qidplus_epsilon,
            "qkd_budget": qkd_entropy_budget}
