"""Monte-Carlo experiments against the security experiment contracts.

Every experiment is a pure function of (params, AttackSpec): trial t draws
its randomness from a generator keyed by (seed, t), so serial and parallel
runs agree bit for bit.  Results are labelled "consistent with" a bound:
finite experiments against implemented strategies cannot establish the
definitions themselves.
"""

from __future__ import annotations

import itertools
import json
import math
from collections import Counter, defaultdict, deque
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.stats import binom, binomtest

from ..gf2 import field as gf_field, int_to_bits, ladder_degree
from ..hashing import MacKey, UhfF, UhfG
from ..protocols.machines import KeyStore, ServerMachine
from ..protocols.messages import FrameType, QubitsMsg
from ..codes import BasisCode
from ..protocols.params import Mode, SessionParams, default_basis_code
from ..protocols.runner import S2U, U2S, run_session, session_rngs
from ..qchannel import Channel, ChannelConfig
from .attacks import AttackSpec, BasesRule, Link, ReplayUser, Strategy, intercept_tap

CONFIDENCE = 0.99
POSTERIOR_TV = 0.02
POSTERIOR_MIN_CLASS = 30


@dataclass
class ExperimentReport:
    """Counts, exact 99% intervals and the bound they are compared against."""

    name: str
    trials: int
    accepts: int
    detections: int = 0
    bound: float | None = None
    reasons: dict = field(default_factory=dict)
    posterior: dict = field(default_factory=dict)
    extras: dict = field(default_factory=dict)

    def __post_init__(self):
        if not 0 <= self.accepts <= self.trials or not 0 <= self.detections <= self.trials:
            raise ValueError("counts exceed the number of trials")

    @property
    def rate(self) -> float:
        return self.accepts / self.trials if self.trials else 0.0

    @property
    def interval(self) -> tuple[float, float]:
        """Clopper-Pearson interval for the acceptance probability."""
        if not self.trials:
            return (0.0, 1.0)
        ci = binomtest(self.accepts, self.trials).proportion_ci(CONFIDENCE, method="exact")
        return (float(ci.low), float(ci.high))

    @property
    def allowed_accepts(self) -> int | None:
        """99% quantile of Binomial(trials, bound): accepts above it contradict the bound."""
        if self.bound is None:
            return None
        return int(binom.ppf(CONFIDENCE, self.trials, min(self.bound, 1.0)))

    @property
    def consistent(self) -> bool:
        """Acceptance count consistent with the bound at the 99% level."""
        return self.bound is None or self.accepts <= self.allowed_accepts

    def to_dict(self) -> dict:
        d = asdict(self)
        d.update(rate=self.rate, interval=self.interval, allowed_accepts=self.allowed_accepts,
                 consistent=self.consistent)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, default=_plain)

    def csv_row(self) -> dict:
        lo, hi = self.interval
        return {"experiment": self.name, "trials": self.trials, "accepts": self.accepts,
                "detections": self.detections, "rate": self.rate, "ci_low": lo, "ci_high": hi,
                "bound": self.bound, "consistent": self.consistent}


def _plain(v):
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating,)):
        return float(v)
    if isinstance(v, np.ndarray):
        return v.tolist()
    return str(v)


def _session_seed(spec: AttackSpec, trial: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(spec.seed, spawn_key=(trial, 1))


def _mac_key(params: SessionParams, spec: AttackSpec):
    if not params.mode.authenticated:
        return None
    rng = np.random.default_rng(np.random.SeedSequence(spec.seed, spawn_key=(1 << 30,)))
    return MacKey.random(params.mac_message_bits, params.ell, rng)


def _wrong_guess(rng, m: int, w: int) -> int:
    g = int(rng.integers(1, m))
    return g + (g >= w)


# --------------------------------------------------------------------------
# impersonation by a dishonest user

def run_impersonation_experiment(params: SessionParams, attack: AttackSpec,
                                 trials: int | None = None) -> ExperimentReport:
    """Fresh uniform w each trial; the impostor runs the protocol with its guess.

    The impostor is handed the MAC key (it may know k without knowing w).
    Accepts are counted over trials with a wrong guess and compared with
    m^2 / 2^l; with a forced correct guess or HONEST every trial counts and
    no bound applies.
    """
    attack.validate(params)
    if attack.strategy not in (Strategy.GUESS_USER, Strategy.HONEST):
        raise ValueError("impersonation needs GUESS_USER or HONEST")
    trials = attack.trials if trials is None else trials
    mac = _mac_key(params, attack)
    correct = attack.force_correct or attack.strategy is Strategy.HONEST
    counted = accepts = 0
    reasons = Counter()
    for t in range(trials):
        rng = attack.trial_rng(t)
        w = int(rng.integers(1, params.m + 1))
        guess = w if correct else (attack.w_guess or _wrong_guess(rng, params.m, w))
        if guess == w and not correct:
            continue
        res = run_session(params, KeyStore(guess, mac), KeyStore(w, mac), seed=_session_seed(attack, t))
        counted += 1
        accepts += res.server.accept
        reasons[res.server.reason.name] += 1
    bound = None if correct else min(1.0, params.m ** 2 / 2.0 ** params.ell)
    return ExperimentReport("impersonation", counted, accepts, counted - accepts, bound, dict(reasons),
                            extras={"strategy": attack.strategy.value, "forced": correct})


# --------------------------------------------------------------------------
# dishonest server guessing a password

def _max_tv(w: np.ndarray, s: np.ndarray, ws: np.ndarray) -> tuple[float, dict]:
    cats = np.unique(s)
    onehot = (s[:, None] == cats[None, :]).astype(float)
    marginal = onehot.mean(axis=0)
    per_w = {}
    for v in ws:
        sel = w == v
        per_w[int(v)] = 0.5 * float(np.abs(onehot[sel].mean(axis=0) - marginal).sum())
    return max(per_w.values(), default=0.0), per_w


def _tv_audit(samples: list[tuple[int, object]], rng, permutations: int = 200) -> dict:
    """Largest TV between the law of a statistic given w and its marginal.

    A permutation null (w labels shuffled) gives the TV that sampling noise
    alone produces at this sample size; ``excess`` is the estimate minus the
    null's 99th percentile, floored at zero.
    """
    w = np.array([a for a, _ in samples])
    _, s = np.unique(np.array([str(b) for _, b in samples]), return_inverse=True)
    counts = Counter(w.tolist())
    ws = np.array(sorted(v for v, c in counts.items() if c >= POSTERIOR_MIN_CLASS))
    if ws.size == 0:
        return {"max_tv": 0.0, "per_w": {}, "null_q99": 0.0, "excess": 0.0}
    keep = np.isin(w, ws)
    w, s = w[keep], s[keep]
    tv, per_w = _max_tv(w, s, ws)
    null = [_max_tv(rng.permutation(w), s, ws)[0] for _ in range(permutations)]
    q99 = float(np.quantile(null, CONFIDENCE))
    return {"max_tv": tv, "per_w": per_w, "null_q99": q99, "excess": max(0.0, tv - q99)}


def server_statistics(server: ServerMachine, z_sent) -> dict:
    """Low-cardinality statistics of what the dishonest server sees."""
    zp = server.observed.get("z_prime")
    stats = {"z_msb": int(z_sent[0])}
    if zp is not None:
        d = np.asarray(z_sent) ^ zp
        stats["match"] = int(not d.any())
        stats["diff_msb"] = int(d[0])
    return stats


def run_dishonest_server_experiment(params: SessionParams, attack: AttackSpec,
                                    trials: int | None = None, raw_audit: bool = False) -> ExperimentReport:
    """The server measures in c(w') for its guess w' and runs the protocol.

    The posterior audit estimates, over trials with w' != w, the largest
    total-variation distance between a server-visible statistic's law given
    w and its marginal, in excess of what shuffled labels produce.  ``raw_audit`` adds the number of disagreements
    between x and x' on I_w, which involves the user's secret x and is not
    protocol-visible.
    """
    attack.validate(params)
    if attack.strategy is not Strategy.GUESS_SERVER:
        raise ValueError("dishonest server experiment needs GUESS_SERVER")
    trials = attack.trials if trials is None else trials
    mac = _mac_key(params, attack)
    samples = defaultdict(list)
    same = same_match = 0
    for t in range(trials):
        rng = attack.trial_rng(t)
        w = int(rng.integers(1, params.m + 1))
        guess = w if attack.force_correct else (attack.w_guess or int(rng.integers(1, params.m + 1)))
        res = run_session(params, KeyStore(w, mac), KeyStore(guess, mac), seed=_session_seed(attack, t))
        srv, usr = res.server_machine, res.user_machine
        z_sent = getattr(usr, "z", None)
        if z_sent is None:
            continue
        if guess == w:
            same += 1
            same_match += bool(res.server.accept)
            continue
        for k, v in server_statistics(srv, z_sent).items():
            samples[k].append((w, v))
        if raw_audit:
            iw = usr.i_w
            samples["raw_disagreements"].append((w, int(np.count_nonzero(usr.x[iw] != srv.x_prime[iw]))))
    if samples.get("raw_disagreements"):
        # coarsen to above/below the pooled median so the audit sees the mean shift
        med = float(np.median([v for _, v in samples["raw_disagreements"]]))
        samples["raw_disagreements"] = [(w, int(v > med)) for w, v in samples["raw_disagreements"]]
    audit_rng = np.random.default_rng(np.random.SeedSequence(attack.seed, spawn_key=(1 << 31,)))
    posterior = {k: _tv_audit(s, audit_rng) for k, s in sorted(samples.items())}
    worst = max((v["excess"] for k, v in posterior.items() if k != "raw_disagreements"), default=0.0)
    wrong = trials - same
    return ExperimentReport(
        "dishonest_server", trials, same_match, 0, None, {}, posterior,
        extras={"same_guess_trials": same, "same_guess_matches": same_match,
                "wrong_guess_trials": wrong, "visible_excess_tv": worst,
                "posterior_audit_passes": worst <= POSTERIOR_TV})


# --------------------------------------------------------------------------
# man in the middle

def _posterior_table(obs: list[tuple[object, int]], m: int) -> dict:
    """Per observable class: counts by w and the deviation of P(w|o) from P(w)."""
    prior = Counter(w for _, w in obs)
    total = len(obs)
    classes = defaultdict(Counter)
    for o, w in obs:
        classes[o][w] += 1
    table = {}
    for o, cnt in sorted(classes.items(), key=lambda kv: str(kv[0])):
        n_o = sum(cnt.values())
        devs = {}
        for w in range(1, m + 1):
            p_prior = prior[w] / total
            devs[w] = cnt[w] / n_o - p_prior
        sigma = max(math.sqrt(max(p * (1 - p), 0.0) / n_o) for p in (prior[w] / total for w in range(1, m + 1)))
        table[str(o)] = {"count": n_o, "by_w": dict(cnt), "max_dev": max(abs(d) for d in devs.values()),
                         "sigma": sigma}
    return table


def single_qubit_code(n: int, seed: int = 0) -> BasisCode:
    """m = 2 basis code whose codewords differ at position 0."""
    cw = default_basis_code(2, n, seed).codewords.copy()
    if cw[0, 0] == cw[1, 0]:
        cw[1, 0] ^= 1
    return BasisCode(cw)


def _replay_once(params, keys, recorded, seed) -> bool:
    rngs = session_rngs(seed)
    channel = Channel(ChannelConfig(), rngs["source"], rngs["medium"])
    server = ServerMachine(params, keys, rngs["server"], channel)
    user = ReplayUser(recorded, channel, rngs["attacker"])
    queue = deque((U2S, m) for m in user.start(params.n))
    while queue:
        direction, msg = queue.popleft()
        if direction == U2S:
            if isinstance(msg, QubitsMsg):
                msg = QubitsMsg(channel.transmit(msg.batch))
            queue.extend((S2U, r) for r in server.handle(msg))
        else:
            queue.extend((U2S, r) for r in user.reply(msg))
    server.abort()
    return bool(server.decision.accept)


def run_mitm_experiment(params: SessionParams, attack: AttackSpec,
                        trials: int | None = None) -> ExperimentReport:
    """A man in the middle attacks one session per trial.

    INTERCEPT_RESEND observes theta on the attacked positions and the
    decision; the posterior table tracks how that observation moves the
    attacker's belief about w.  BLOCK_ABORT also checks that the keys are
    untouched and that a following honest session accepts.  REPLAY records a
    fresh honest session and replays its classical messages to a new one.
    """
    attack.validate(params)
    allowed = (Strategy.INTERCEPT_RESEND, Strategy.BITFLIP, Strategy.BLOCK_ABORT, Strategy.REPLAY)
    if attack.strategy not in allowed:
        raise ValueError(f"MITM strategies are {[s.value for s in allowed]}")
    trials = attack.trials if trials is None else trials
    mac = _mac_key(params, attack)
    obs, reasons = [], Counter()
    accepts = recovered = unchanged = 0
    for t in range(trials):
        rng = attack.trial_rng(t)
        w = int(rng.integers(1, params.m + 1))
        keys = KeyStore(w, mac)
        digest = keys.digest()
        if attack.strategy is Strategy.REPLAY:
            ref = Link()
            run_session(params, keys, seed=np.random.SeedSequence(attack.seed, spawn_key=(t, 2)), link=ref)
            ok = _replay_once(params, keys, ref.seen, _session_seed(attack, t))
            accepts += ok
            reasons["OK" if ok else "REJECT"] += 1
            unchanged += keys.digest() == digest
            continue
        link = Link(attack)
        tap = None
        if attack.strategy is Strategy.INTERCEPT_RESEND:
            tap = intercept_tap(attack, attack.trial_rng(t, 3))
        res = run_session(params, keys, seed=_session_seed(attack, t), tap=tap, link=link)
        accepts += res.server.accept
        reasons[res.server.reason.name] += 1
        unchanged += keys.digest() == digest
        theta_msg = link.first(FrameType.THETA_F) or link.first(FrameType.THETA_J_S_F)
        if attack.strategy is Strategy.INTERCEPT_RESEND and theta_msg is not None:
            pos = list(attack.positions or range(params.n))[:2]
            seen_theta = tuple(int(theta_msg.theta[i]) for i in pos)
            obs.append(((seen_theta, bool(res.server.accept)), w))
        if attack.strategy is Strategy.BLOCK_ABORT:
            after = run_session(params, keys, seed=np.random.SeedSequence(attack.seed, spawn_key=(t, 4)))
            recovered += after.server.accept and after.user.accept
            reasons["both_terminal"] = reasons.get("both_terminal", 0) + (
                res.server_machine.terminal and res.user_machine.terminal)
    posterior = _posterior_table(obs, params.m) if obs else {}
    extras = {"strategy": attack.strategy.value, "keys_unchanged": unchanged}
    if posterior:
        big = [v for v in posterior.values() if v["count"] >= POSTERIOR_MIN_CLASS]
        extras["max_posterior_dev"] = max((v["max_dev"] for v in big), default=0.0)
        extras["no_sharpening"] = all(v["max_dev"] <= 0.01 + 3 * v["sigma"] for v in posterior.values())
    if attack.strategy is Strategy.BLOCK_ABORT:
        extras["recovered"] = recovered
    return ExperimentReport("mitm", trials, accepts, trials - accepts, None, dict(reasons), posterior, extras)


# --------------------------------------------------------------------------
# key reuse

def make_schedule(k: int, failure_rate: float, seed: int = 0) -> list:
    """k entries: "honest" or a failure-inducing AttackSpec (fixed before the run)."""
    rng = np.random.default_rng(seed)
    failures = [AttackSpec(Strategy.BITFLIP, frame=FrameType.Z, bit=3),
                AttackSpec(Strategy.BITFLIP, frame=FrameType.TEST_Z_TAG, bit=5),
                AttackSpec(Strategy.BLOCK_ABORT, frame=FrameType.G),
                AttackSpec(Strategy.BLOCK_ABORT, frame=FrameType.T_G),
                AttackSpec(Strategy.INTERCEPT_RESEND, bases=BasesRule.RANDOM),
                AttackSpec(Strategy.GUESS_USER)]
    n_fail = int(round(k * failure_rate))
    kinds = ["honest"] * (k - n_fail) + ["fail"] * n_fail
    rng.shuffle(kinds)
    return ["honest" if kind == "honest" else failures[int(rng.integers(len(failures)))] for kind in kinds]


def _applies(params, spec) -> AttackSpec | None:
    """Map frame-targeted attacks onto the frames this mode actually sends."""
    if spec.frame is None:
        return spec
    authenticated = params.mode.authenticated
    swap = {FrameType.Z: FrameType.TEST_Z_TAG, FrameType.G: FrameType.T_G}
    back = {v: k for k, v in swap.items()}
    frame = spec.frame
    if authenticated and frame in swap:
        frame = swap[frame]
    if not authenticated and frame in back:
        frame = back[frame]
    return AttackSpec(spec.strategy, frame=frame, bit=spec.bit, seed=spec.seed)


def run_reuse_experiment(params: SessionParams, schedule: list, seed: int = 0) -> ExperimentReport:
    """Run the schedule with one long-term key store; keys must never change.

    ``accepts`` counts accepting honest sessions; ``trials`` is the number of
    honest sessions.  QKD successes must produce pairwise distinct keys.
    """
    rng = np.random.default_rng(seed)
    keys = KeyStore.generate(params, rng)
    digest = keys.digest()
    honest = accepts = failures_seen = 0
    digests_ok = True
    keys_out = []
    reasons = Counter()
    for i, entry in enumerate(schedule):
        sess = np.random.SeedSequence(seed, spawn_key=(i,))
        if entry == "honest":
            res = run_session(params, keys, seed=sess)
            honest += 1
            accepts += res.server.accept and res.user.accept
            if params.mode is Mode.QKD and res.sk_user is not None:
                keys_out.append(res.sk_user.tobytes())
        else:
            spec = _applies(params, entry)
            if spec.strategy is Strategy.GUESS_USER:
                res = run_session(params, KeyStore(_wrong_guess(rng, params.m, keys.w), keys.mac_key), keys, seed=sess)
            else:
                tap = intercept_tap(spec, np.random.default_rng(sess.spawn(1)[0])) \
                    if spec.strategy is Strategy.INTERCEPT_RESEND else None
                res = run_session(params, keys, seed=sess, tap=tap, link=Link(spec))
            failures_seen += not res.server.accept
            reasons[res.server.reason.name] += 1
        digests_ok &= keys.digest() == digest
    extras = {"key_digest": digest, "digest_constant": digests_ok, "induced_failures": failures_seen,
              "sessions": len(schedule)}
    if params.mode is Mode.QKD:
        extras["distinct_keys"] = len(set(keys_out)) == len(keys_out)
        extras["qkd_successes"] = len(keys_out)
    return ExperimentReport("reuse", honest, accepts, 0, None, dict(reasons), {}, extras)


# --------------------------------------------------------------------------
# S_j distinctness

def _sj_values(params, x, theta, f, g) -> list[bytes]:
    code = params.basis_code
    return [(f(x[code.info_set(theta, j)]) ^ g(j)).tobytes() for j in range(1, params.m + 1)]


def sj_distinctness_audit(params: SessionParams, trials: int = 1000, seed: int = 0,
                          degenerate_g: bool = False) -> ExperimentReport:
    """Collision frequency of S_j = f(x|I_j) xor g(j), j = 1..m.

    ``degenerate_g`` fixes the multiplier of g to zero, so g adds the same
    mask to every S_j and collisions track collisions of the f parts.
    """
    collisions = 0
    for t in range(trials):
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(t,)))
        x = rng.integers(0, 2, params.n, dtype=np.uint8)
        theta = rng.integers(0, 2, params.n, dtype=np.uint8)
        f = UhfF.random(params.n, params.ell, rng)
        g = UhfG.random(params.m, params.ell, rng)
        if degenerate_g:
            g = UhfG(g.a.spec.element(0), g.b, g.m)
        s = _sj_values(params, x, theta, f, g)
        collisions += len(set(s)) < len(s)
    bound = params.m ** 2 / 2.0 ** (params.ell + 1)
    sigma = math.sqrt(min(bound, 1.0) * (1 - min(bound, 1.0)) / trials) if trials else 0.0
    extras = {"three_sigma_limit": bound + 3 * sigma, "within_3sigma": collisions / max(trials, 1) <= bound + 3 * sigma,
              "degenerate_key_caveat": degenerate_g}
    return ExperimentReport("sj_distinctness", trials, collisions, 0, bound, {}, {}, extras)


def sj_collision_exact(params: SessionParams) -> float:
    """Exact collision probability by enumerating x, theta and all f, g keys."""
    n, m, ell = params.n, params.m, params.ell
    deg_f = ladder_degree(max(n, ell))
    deg_g = UhfG.degree_for(m, ell)
    if 2 * n + deg_f + deg_g + ell > 20:
        raise ValueError("parameters too large to enumerate")
    fspec, gspec = gf_field(deg_f), gf_field(deg_g)
    total = hits = 0
    words = [np.array(b, np.uint8) for b in itertools.product((0, 1), repeat=n)]
    fs = [UhfF(fspec.element(k), ell, n) for k in range(1 << deg_f)]
    gs = [UhfG(gspec.element(a), int_to_bits(b, ell), m) for a in range(1 << deg_g) for b in range(1 << ell)]
    for x in words:
        for theta in words:
            for f in fs:
                for g in gs:
                    s = _sj_values(params, x, theta, f, g)
                    hits += len(set(s)) < len(s)
                    total += 1
    return hits / total


def reason_counts(reports) -> dict:
    out = Counter()
    for r in reports:
        out.update(r.reasons)
    return dict(out)


__all__ = ["ExperimentReport", "make_schedule", "run_dishonest_server_experiment",
           "run_impersonation_experiment", "run_mitm_experiment", "run_reuse_experiment",
           "single_qubit_code", "sj_collision_exact", "sj_distinctness_audit"]
