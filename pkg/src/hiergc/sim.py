"""Deterministic single-round simulator with fault injection and load accounting.

Stragglers send nothing. Adversaries replace their payload by a seeded random
vector that is guaranteed to differ from the honest one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations, product

import numpy as np

from . import codec
from .codec import GradientSet, Message, RandomnessSet
from .errors import InvalidFaultPlanError, TooManyPatternsError
from .placement import (
    EvalPlan,
    Placement,
    RandomnessPlan,
    SystemParams,
    margins,
    margins_from,
)
from .reports import Report

DEFAULT_CAP = 10**6


@dataclass(frozen=True)
class FaultPlan:
    relay_stragglers: frozenset = frozenset()
    relay_adversaries: frozenset = frozenset()
    worker_stragglers: tuple = ()  # one frozenset per cluster
    worker_adversaries: tuple = ()
    corruption_seed: int = 0

    def __post_init__(self):
        set_ = object.__setattr__
        set_(self, "relay_stragglers", frozenset(self.relay_stragglers))
        set_(self, "relay_adversaries", frozenset(self.relay_adversaries))
        set_(self, "worker_stragglers", tuple(frozenset(s) for s in self.worker_stragglers))
        set_(self, "worker_adversaries", tuple(frozenset(s) for s in self.worker_adversaries))

    @classmethod
    def none(cls, params: SystemParams, corruption_seed: int = 0) -> FaultPlan:
        empty = (frozenset(),) * params.N1
        return cls(frozenset(), frozenset(), empty, empty, corruption_seed)

    def stragglers_of(self, n: int) -> frozenset:
        return self.worker_stragglers[n] if self.worker_stragglers else frozenset()

    def adversaries_of(self, n: int) -> frozenset:
        return self.worker_adversaries[n] if self.worker_adversaries else frozenset()

    def validate(self, params: SystemParams) -> None:
        def fail(msg):
            raise InvalidFaultPlanError(msg)

        for name, seq in (("worker_stragglers", self.worker_stragglers), ("worker_adversaries", self.worker_adversaries)):
            if seq and len(seq) != params.N1:
                fail(f"{name} must list one set per cluster")
        nodes = range(params.N1)
        if not (self.relay_stragglers | self.relay_adversaries) <= set(nodes):
            fail("unknown relay index in fault plan")
        if len(self.relay_stragglers) > params.s1:
            fail(f"{len(self.relay_stragglers)} relay stragglers exceed s1={params.s1}")
        if len(self.relay_adversaries) > params.a1:
            fail(f"{len(self.relay_adversaries)} relay adversaries exceed a1={params.a1}")
        if self.relay_stragglers & self.relay_adversaries:
            fail("a relay cannot be both straggler and adversary")
        for n in nodes:
            s, a = self.stragglers_of(n), self.adversaries_of(n)
            if not (s | a) <= set(range(params.N2[n])):
                fail(f"unknown worker index in cluster {n}")
            if len(s) > params.s2[n]:
                fail(f"cluster {n}: {len(s)} stragglers exceed s2={params.s2[n]}")
            if len(a) > params.a2[n]:
                fail(f"cluster {n}: {len(a)} adversaries exceed a2={params.a2[n]}")
            if s & a:
                fail(f"cluster {n}: a worker cannot be both straggler and adversary")
            if a and params.private:
                fail("private mode forbids worker adversaries")


@dataclass
class RoundOutcome:
    recovered: np.ndarray
    expected: np.ndarray
    success: bool
    loads: dict  # {"worker_to_relay": {(n, j): len}, "relay_to_server": {n: len}}
    identified_adversaries: frozenset
    worker_messages: dict = field(default_factory=dict)  # (n, j) -> payload as sent
    relay_messages: dict = field(default_factory=dict)  # n -> payload as sent
    d_padded: int = 0


def corrupt(payload: np.ndarray, q: int, seed: int, node: tuple) -> np.ndarray:
    """Seeded random replacement that never equals ``payload``."""
    key = [seed, *(1 if part == "relay" else 2 if part == "worker" else int(part) for part in node)]
    rng = np.random.default_rng(key)
    while True:
        bad = rng.integers(0, q, size=payload.shape, dtype=np.int64)
        if not np.array_equal(bad, payload):
            return bad


class _Round:
    """Encoding state shared by every fault pattern of one gradient draw."""

    def __init__(self, params, placement, plan, gradients, rand_plan=None, randomness=None):
        self.params, self.placement, self.plan = params, placement, plan
        self.rand_plan = rand_plan
        self.m1, self.m2 = margins(params, placement)
        if isinstance(gradients, GradientSet):
            self.grads = gradients
        else:
            self.grads = codec.partition_pad(gradients, self.m1, self.m2, params.q)
        if self.grads.d != params.d:
            raise InvalidFaultPlanError(f"gradient length {self.grads.d} != d={params.d}")
        if params.private:
            if rand_plan is None:
                raise ValueError("private mode needs a randomness plan")
            if randomness is None or isinstance(randomness, int):
                seed = 0 if randomness is None else randomness
                randomness = codec.generate_randomness(
                    rand_plan.K_prime, self.grads.d_padded, self.m1, params.q, seed
                )
        self.rand = randomness
        self._honest = {}

    def honest(self, n: int, j: int) -> np.ndarray:
        if (n, j) not in self._honest:
            p = self.params
            if p.private:
                msg = codec.worker_encode_private(
                    n, j, self.grads, self.rand, self.placement, self.rand_plan, self.plan, p
                )
            else:
                msg = codec.worker_encode(n, j, self.grads, self.placement, self.plan, p)
            self._honest[n, j] = msg.payload
        return self._honest[n, j]

    def relay(self, n: int, stragglers, adversaries, seed: int):
        """Run cluster ``n`` under the given worker faults."""
        p = self.params
        sent = {}
        for j in range(p.N2[n]):
            if j in stragglers:
                continue
            payload = self.honest(n, j)
            if j in adversaries:
                payload = corrupt(payload, p.q, seed, ("worker", n, j))
            sent[j] = payload
        msgs = [Message(("worker", n, j), v, j in adversaries) for j, v in sent.items()]
        agg = codec.relay_aggregate_private if p.private else codec.relay_aggregate
        out, bad = agg(n, msgs, self.placement, self.plan, p, identify=True)
        return out.payload, bad, sent

    def reference(self, n: int) -> np.ndarray:
        return codec.relay_reference(
            n, self.grads, self.placement, self.plan, self.params, self.rand, self.rand_plan
        )

    def server(self, relay_payloads: dict, adversaries, seed: int):
        p = self.params
        msgs = []
        sent = {}
        for n, v in relay_payloads.items():
            if n in adversaries:
                v = corrupt(v, p.q, seed, ("relay", n))
            sent[n] = v
            msgs.append(Message(("relay", n), v, n in adversaries))
        dec = codec.server_decode_private if p.private else codec.server_decode
        g, bad = dec(msgs, self.placement, self.plan, p, identify=True)
        return g, bad, sent

    def run(self, faults: FaultPlan) -> RoundOutcome:
        p = self.params
        faults.validate(p)
        seed = faults.corruption_seed
        loads = {"worker_to_relay": {}, "relay_to_server": {}}
        identified = set()
        worker_sent, relay_out = {}, {}
        for n in range(p.N1):
            payload, bad, sent = self.relay(n, faults.stragglers_of(n), faults.adversaries_of(n), seed)
            identified |= {("worker", n, j) for j in bad}
            for j, v in sent.items():
                worker_sent[n, j] = v
                loads["worker_to_relay"][n, j] = len(v)
            if n not in faults.relay_stragglers:
                relay_out[n] = payload
        g, bad, relay_sent = self.server(relay_out, faults.relay_adversaries, seed)
        for n, v in relay_sent.items():
            loads["relay_to_server"][n] = len(v)
        identified |= {("relay", n) for n in bad}
        expected = self.grads.total()
        return RoundOutcome(
            recovered=g,
            expected=expected,
            success=bool(np.array_equal(g, expected)),
            loads=loads,
            identified_adversaries=frozenset(identified),
            worker_messages=worker_sent,
            relay_messages=relay_sent,
            d_padded=self.grads.d_padded,
        )


def run_round(
    params: SystemParams,
    placement: Placement,
    plan: EvalPlan,
    gradients,
    faults: FaultPlan,
    rand_plan: RandomnessPlan | None = None,
    randomness: RandomnessSet | int | None = None,
) -> RoundOutcome:
    """Encode, inject faults, aggregate and decode one round.

    ``gradients`` is a raw ``K x d`` table or a :class:`GradientSet`. In private
    mode ``randomness`` is a :class:`RandomnessSet` or an integer seed.
    """
    return _Round(params, placement, plan, gradients, rand_plan, randomness).run(faults)


# -- fault enumeration -------------------------------------------------------


def _layer_patterns(size: int, s: int, a: int, maximal_only: bool):
    s_sizes = [s] if maximal_only else range(s + 1)
    a_sizes = [a] if maximal_only else range(a + 1)
    out = []
    for ns in s_sizes:
        for S in combinations(range(size), ns):
            rest = [i for i in range(size) if i not in S]
            for na in a_sizes:
                for A in combinations(rest, na):
                    out.append((frozenset(S), frozenset(A)))
    return out


def count_fault_patterns(params: SystemParams, maximal_only: bool = True) -> int:
    def layer(size, s, a):
        if maximal_only:
            return math.comb(size, s) * math.comb(size - s, a)
        return sum(
            math.comb(size, i) * math.comb(size - i, k) for i in range(s + 1) for k in range(a + 1)
        )

    total = layer(params.N1, params.s1, params.a1)
    for N2, s2, a2 in zip(params.N2, params.s2, params.a2):
        total *= layer(N2, s2, a2)
    return total


def enumerate_fault_patterns(
    params: SystemParams,
    maximal_only: bool = True,
    cap: int = DEFAULT_CAP,
    corruption_seed: int = 0,
) -> list:
    """Every fault pattern (exactly s and a faulty nodes per layer by default)."""
    count = count_fault_patterns(params, maximal_only)
    if count > cap:
        raise TooManyPatternsError(count, cap)
    relay = _layer_patterns(params.N1, params.s1, params.a1, maximal_only)
    clusters = [
        _layer_patterns(N2, s2, a2, maximal_only)
        for N2, s2, a2 in zip(params.N2, params.s2, params.a2)
    ]
    plans = []
    for (rs, ra), *cl in product(relay, *clusters):
        plans.append(
            FaultPlan(rs, ra, tuple(s for s, _ in cl), tuple(a for _, a in cl), corruption_seed)
        )
    return plans


def random_fault_plan(params: SystemParams, seed: int) -> FaultPlan:
    """A maximal fault pattern drawn uniformly per layer with ``seed``."""
    rng = np.random.default_rng(seed)

    def draw(size, s, a):
        perm = [int(x) for x in rng.permutation(size)]
        return perm[:s], perm[s : s + a]

    rs, ra = draw(params.N1, params.s1, params.a1)
    cl = [draw(N, s, a) for N, s, a in zip(params.N2, params.s2, params.a2)]
    return FaultPlan(rs, ra, tuple(c[0] for c in cl), tuple(c[1] for c in cl), seed)


# -- sweeps ------------------------------------------------------------------


@dataclass
class SweepResult:
    strategy: str
    patterns: int
    failures: list = field(default_factory=list)  # human-readable descriptions

    @property
    def passed(self) -> bool:
        return not self.failures

    def to_dict(self) -> dict:
        return {
            "strategy": self.strategy,
            "patterns": self.patterns,
            "passed": self.patterns if self.passed else None,
            "failures": self.failures,
            "success": self.passed,
        }


def _describe(exc: Exception) -> str:
    return f"{type(exc).__name__}: {exc}"


def sweep(
    params: SystemParams,
    placement: Placement,
    plan: EvalPlan,
    gradients,
    rand_plan: RandomnessPlan | None = None,
    randomness=None,
    maximal_only: bool = True,
    cap: int = DEFAULT_CAP,
    strategy: str = "auto",
    corruption_seed: int = 0,
) -> SweepResult:
    """Check exact recovery under every fault pattern within the budgets.

    ``strategy="full"`` runs :func:`run_round` on each pattern of the product
    enumeration. ``"factorized"`` exploits that a relay's output depends only
    on its own cluster: it checks every worker-fault pattern of every cluster
    reproduces the honest relay message (and flags exactly the corrupted
    workers), then every relay-fault pattern against honest relay messages.
    Together these cover the whole product without enumerating it. ``"auto"``
    picks ``full`` when the product count is within ``cap``.
    """
    count = count_fault_patterns(params, maximal_only)
    if strategy == "auto":
        strategy = "full" if count <= cap else "factorized"
    rnd = _Round(params, placement, plan, gradients, rand_plan, randomness)
    result = SweepResult(strategy, count)

    if strategy == "full":
        for i, faults in enumerate(enumerate_fault_patterns(params, maximal_only, cap, corruption_seed)):
            try:
                out = rnd.run(faults)
            except Exception as exc:  # noqa: BLE001 - every failure is reported
                result.failures.append(f"pattern {i}: {_describe(exc)}")
                continue
            corrupted = {("relay", n) for n in faults.relay_adversaries}
            corrupted |= {("worker", n, j) for n, a in enumerate(faults.worker_adversaries) for j in a}
            if not out.success:
                result.failures.append(f"pattern {i}: wrong gradient")
            elif not corrupted <= out.identified_adversaries:
                result.failures.append(f"pattern {i}: adversaries not identified")
        return result

    if strategy != "factorized":
        raise ValueError(f"unknown sweep strategy {strategy!r}")
    reference = {n: rnd.reference(n) for n in range(params.N1)}
    for n in range(params.N1):
        pats = _layer_patterns(params.N2[n], params.s2[n], params.a2[n], maximal_only)
        for i, (S, A) in enumerate(pats):
            try:
                payload, bad, _ = rnd.relay(n, S, A, corruption_seed + i)
            except Exception as exc:  # noqa: BLE001
                result.failures.append(f"cluster {n} pattern {i}: {_describe(exc)}")
                continue
            if not np.array_equal(payload, reference[n]):
                result.failures.append(f"cluster {n} pattern {i}: wrong relay message")
            elif bad != A:
                result.failures.append(f"cluster {n} pattern {i}: adversaries not identified")
    expected = rnd.grads.total()
    for i, (S, A) in enumerate(_layer_patterns(params.N1, params.s1, params.a1, maximal_only)):
        relay_out = {n: v for n, v in reference.items() if n not in S}
        try:
            g, bad, _ = rnd.server(relay_out, A, corruption_seed + i)
        except Exception as exc:  # noqa: BLE001
            result.failures.append(f"relay pattern {i}: {_describe(exc)}")
            continue
        if not np.array_equal(g, expected):
            result.failures.append(f"relay pattern {i}: wrong gradient")
        elif bad != A:
            result.failures.append(f"relay pattern {i}: adversaries not identified")
    return result


# -- loads -------------------------------------------------------------------


def format_load(c: Fraction) -> str:
    if c.numerator == 1:
        return "d" if c.denominator == 1 else f"d/{c.denominator}"
    if c.denominator == 1:
        return f"{c.numerator}d"
    return f"{c.numerator}d/{c.denominator}"


def check_loads(
    outcome: RoundOutcome,
    params: SystemParams,
    r1: int,
    r2,
    r_T: int | None = None,
):
    """Compare measured payload sizes with the optimal loads.

    Returns ``(report, summary)``. ``summary`` also holds the comparison with a
    flat (non-hierarchical) topology, ``N1*N2*d / (r_T - N1*s2)`` received at
    the server, against ``N1*d/m1`` for the hierarchy. It is only computed for
    homogeneous clusters without worker adversaries; ``r_T`` defaults to its upper bound ``r1*N2``, the
    value most favourable to the flat topology.
    """

    m1, m2 = margins_from(params, r1, r2)
    dp = outcome.d_padded or codec.padded_length(params.d, m1, m2)
    c1 = dp // m1
    c2 = [dp // (m1 * m) for m in m2]
    report = Report()
    w2r = outcome.loads["worker_to_relay"]
    r2s = outcome.loads["relay_to_server"]
    bad_w = sorted(k for k, v in w2r.items() if v != c2[k[0]])
    bad_r = sorted(n for n, v in r2s.items() if v != c1)
    report.add("worker_to_relay", not bad_w, f"links {bad_w} differ from d'/(m1*m2)" if bad_w else "")
    report.add("relay_to_server", not bad_r, f"relays {bad_r} differ from d'/m1" if bad_r else "")

    summary = {
        "d": params.d,
        "d_padded": dp,
        "m1": m1,
        "m2": list(m2),
        "C1_optimal": c1,
        "C2_optimal": c2,
        "C1_theory": format_load(Fraction(1, m1)),
        "C2_theory": [format_load(Fraction(1, m1 * m)) for m in m2],
        "C1_measured": sorted(set(r2s.values())),
        "C2_measured": [sorted({v for (n, _), v in w2r.items() if n == c}) for c in range(params.N1)],
        "flat_comparison": None,
    }
    homogeneous = len(set(params.N2)) == 1 and len(set(params.s2)) == 1 and not any(params.a2)
    if homogeneous:
        N2, s2 = params.N2[0], params.s2[0]
        rt = r1 * N2 if r_T is None else r_T
        hier = Fraction(params.N1, m1)
        if rt - params.N1 * s2 > 0:
            flat = Fraction(params.N1 * N2, rt - params.N1 * s2)
            summary["flat_comparison"] = {
                "r_T": rt,
                "flat_server_load": format_load(flat),
                "hierarchical_server_load": format_load(hier),
                "ratio": float(hier / flat),
                "hierarchical_below_flat": hier < flat,
            }
    return report, summary
