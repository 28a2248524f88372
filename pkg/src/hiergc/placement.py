"""System parameters, dataset/randomness placements and evaluation points.

Indices are 0-based throughout the library: cluster ``n`` in ``range(N1)``,
worker ``j`` in ``range(N2[n])``, dataset ``k`` in ``range(K)``. Only the JSON
config layer (:mod:`hiergc.cli`) speaks 1-based ids.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

from . import gf
from .errors import (
    ConfigurationError,
    InvalidPlacementError,
    ModeError,
    UnsupportedConfigError,
)
from .reports import Report

MODES = ("plain", "private")


def _tuple(v, n=None, name="value"):
    if isinstance(v, int):
        if n is None:
            raise ConfigurationError(f"{name} must be a sequence")
        return (v,) * n
    t = tuple(int(x) for x in v)
    if n is not None and len(t) != n:
        raise ConfigurationError(f"{name} must have {n} entries, got {len(t)}")
    return t


@dataclass(frozen=True)
class SystemParams:
    """Topology and fault budgets.

    Per-cluster values (``N2``, ``s2``, ``a2``) accept either a sequence or a
    single int broadcast to every cluster.
    """

    N1: int
    N2: tuple
    s1: int = 0
    a1: int = 0
    s2: tuple = 0
    a2: tuple = 0
    d: int = 1
    q: int = gf.DEFAULT_Q
    mode: str = "plain"

    def __post_init__(self):
        if self.N1 < 1:
            raise ConfigurationError("N1 must be at least 1")
        set_ = object.__setattr__
        set_(self, "N2", _tuple(self.N2, self.N1, "N2"))
        set_(self, "s2", _tuple(self.s2, self.N1, "s2"))
        set_(self, "a2", _tuple(self.a2, self.N1, "a2"))
        set_(self, "q", gf.check_modulus(self.q))
        if self.d < 1:
            raise ConfigurationError("d must be at least 1")
        if self.mode not in MODES:
            raise ConfigurationError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.s1 < 0 or self.a1 < 0:
            raise ConfigurationError("relay budgets s1, a1 must be non-negative")
        if self.s1 + 2 * self.a1 >= self.N1:
            raise ConfigurationError("s1 + 2*a1 < N1 is required")
        for n, (N2, s2, a2) in enumerate(zip(self.N2, self.s2, self.a2)):
            if N2 < 1:
                raise ConfigurationError(f"N2[{n}] must be at least 1")
            if s2 < 0 or a2 < 0:
                raise ConfigurationError(f"worker budgets of cluster {n} must be non-negative")
            if s2 + 2 * a2 >= N2:
                raise ConfigurationError(f"cluster {n}: s2 + 2*a2 < N2 is required")
        if self.private and any(self.a2):
            raise ConfigurationError("private mode requires a2 = 0 in every cluster")

    @property
    def private(self) -> bool:
        return self.mode == "private"

    def with_mode(self, mode: str) -> SystemParams:
        return SystemParams(self.N1, self.N2, self.s1, self.a1, self.s2, self.a2, self.d, self.q, mode)


@dataclass(frozen=True)
class Placement:
    """Dataset assignment: ``gamma[n][j]`` is the set of datasets of worker (n, j)."""

    K: int
    gamma: tuple

    def __post_init__(self):
        gamma = tuple(tuple(frozenset(int(k) for k in ws) for ws in cl) for cl in self.gamma)
        object.__setattr__(self, "gamma", gamma)
        if self.K < 1:
            raise InvalidPlacementError("K must be at least 1")
        for n, cluster in enumerate(gamma):
            if not cluster:
                raise InvalidPlacementError(f"cluster {n} has no workers")
            for j, ws in enumerate(cluster):
                if not ws:
                    raise InvalidPlacementError(f"worker ({n}, {j}) has no datasets")
                if any(not 0 <= k < self.K for k in ws):
                    raise InvalidPlacementError(f"worker ({n}, {j}) holds an unknown dataset")

    @property
    def N1(self) -> int:
        return len(self.gamma)

    def cluster_sets(self) -> tuple:
        return tuple(frozenset().union(*cl) for cl in self.gamma)

    def check_topology(self, params: SystemParams) -> None:
        if self.N1 != params.N1 or tuple(len(c) for c in self.gamma) != params.N2:
            raise InvalidPlacementError("placement shape does not match the topology")


@dataclass(frozen=True)
class RandomnessPlan:
    """Random-vector assignment: ``gamma_prime[n][j]`` indexes into ``range(K_prime)``."""

    K_prime: int
    gamma_prime: tuple

    def __post_init__(self):
        gp = tuple(tuple(frozenset(int(k) for k in ws) for ws in cl) for cl in self.gamma_prime)
        object.__setattr__(self, "gamma_prime", gp)
        for n, cluster in enumerate(gp):
            for j, ws in enumerate(cluster):
                if any(not 0 <= k < self.K_prime for k in ws):
                    raise InvalidPlacementError(f"worker ({n}, {j}) holds an unknown random vector")

    def cluster_sets(self) -> tuple:
        return tuple(frozenset().union(*cl) for cl in self.gamma_prime)


@dataclass(frozen=True)
class EvalPlan:
    """Evaluation points, stored reduced modulo ``q``."""

    alpha1: tuple
    beta1: tuple
    alpha2: tuple
    beta2: tuple
    q: int

    def __post_init__(self):
        q = self.q
        set_ = object.__setattr__
        set_(self, "alpha1", tuple(int(x) % q for x in self.alpha1))
        set_(self, "beta1", tuple(int(x) % q for x in self.beta1))
        set_(self, "alpha2", tuple(tuple(int(x) % q for x in a) for a in self.alpha2))
        set_(self, "beta2", tuple(tuple(int(x) % q for x in b) for b in self.beta2))
        if len(set(self.alpha1 + self.beta1)) != len(self.alpha1) + len(self.beta1):
            raise ConfigurationError("server-layer evaluation points are not distinct")
        for n, (a, b) in enumerate(zip(self.alpha2, self.beta2)):
            if len(set(a + b)) != len(a) + len(b):
                raise ConfigurationError(f"cluster {n} evaluation points are not distinct")

    def check_shape(self, params: SystemParams, m1: int, m2: Sequence[int]) -> None:
        ok = (
            len(self.alpha1) == params.N1
            and len(self.beta1) == m1
            and tuple(len(a) for a in self.alpha2) == params.N2
            and tuple(len(b) for b in self.beta2) == tuple(m2)
        )
        if not ok:
            raise ConfigurationError("evaluation plan does not match N1, N2, m1, m2")


# -- replication and margins -----------------------------------------------


@lru_cache(maxsize=256)
def compute_replication(p: Placement):
    """Minimum replication across clusters (``r1``) and within each cluster (``r2``)."""
    clusters = p.cluster_sets()
    per_dataset = [sum(k in c for c in clusters) for k in range(p.K)]
    missing = [k for k, c in enumerate(per_dataset) if c == 0]
    if missing:
        raise InvalidPlacementError(f"datasets {missing} are assigned to no cluster")
    r1 = min(per_dataset)
    r2 = tuple(
        min(sum(k in ws for ws in cl) for k in gamma_n)
        for cl, gamma_n in zip(p.gamma, clusters)
    )
    return r1, r2


def margins_from(params: SystemParams, r1: int, r2: Sequence[int]):
    """``m1 = r1 - 2a1 - s1`` and per-cluster ``m2`` (forced to 1 in private mode)."""
    m1 = r1 - 2 * params.a1 - params.s1
    if m1 < 1:
        raise ConfigurationError(
            f"m1 >= 1 violated: r1={r1}, s1={params.s1}, a1={params.a1} give m1={m1}"
        )
    m2 = []
    for n, (r, s, a) in enumerate(zip(r2, params.s2, params.a2)):
        m = r - 2 * a - s
        if m < 1:
            raise ConfigurationError(
                f"m2 >= 1 violated in cluster {n}: r2={r}, s2={s}, a2={a} give m2={m}"
            )
        m2.append(1 if params.private else m)
    if params.private and not params.s1 + 1 <= r1 <= params.N1 - 1:
        raise UnsupportedConfigError(
            f"private mode needs r1 in [s1+1, N1-1] = [{params.s1 + 1}, {params.N1 - 1}], got {r1}"
        )
    return m1, tuple(m2)


def margins(params: SystemParams, placement: Placement):
    placement.check_topology(params)
    return margins_from(params, *compute_replication(placement))


def default_eval_plan(params: SystemParams, r1: int, r2: Sequence[int]) -> EvalPlan:
    """alpha = 1, 2, ...; beta = 0, -1, -2, ... at both layers."""
    m1, m2 = margins_from(params, r1, r2)
    q = params.q
    if params.N1 + m1 > q or any(N + m > q for N, m in zip(params.N2, m2)):
        raise ConfigurationError(f"field of size {q} is too small for the evaluation points")
    return EvalPlan(
        alpha1=range(1, params.N1 + 1),
        beta1=[-i for i in range(m1)],
        alpha2=[range(1, N + 1) for N in params.N2],
        beta2=[[-i for i in range(m)] for m in m2],
        q=q,
    )


# -- construction ------------------------------------------------------------


def generate_placement(params: SystemParams, K: int, r1_target: int, r2_targets) -> Placement:
    """Cyclic placement reaching exactly the requested replication factors.

    Dataset ``k`` goes to clusters ``k, k+1, ..., k+r1-1 (mod N1)``; inside a
    cluster the ``i``-th dataset goes to workers ``i, ..., i+r2-1 (mod N2)``,
    with window starts spread out when the cluster holds fewer datasets than
    workers. Every worker is non-empty iff ``|cluster| * r2 >= N2``.
    """
    r2_targets = _tuple(r2_targets, params.N1, "r2_targets")
    if not 1 <= r1_target <= params.N1:
        raise ConfigurationError(f"r1_target={r1_target} must lie in [1, N1={params.N1}]")
    for n, (r2, N2) in enumerate(zip(r2_targets, params.N2)):
        if not 1 <= r2 <= N2:
            raise ConfigurationError(f"r2_targets[{n}]={r2} must lie in [1, N2={N2}]")
    margins_from(params, r1_target, r2_targets)

    members = [[] for _ in range(params.N1)]
    for k in range(K):
        for t in range(r1_target):
            members[(k + t) % params.N1].append(k)
    gamma = []
    for n, datasets in enumerate(members):
        N2, r2 = params.N2[n], r2_targets[n]
        workers = [set() for _ in range(N2)]
        c = len(datasets)
        for i, k in enumerate(datasets):
            start = i if c >= N2 else i * N2 // c  # spread windows when datasets are scarce
            for t in range(r2):
                workers[(start + t) % N2].add(k)
        if not all(workers):
            raise InvalidPlacementError(
                f"K={K} is too small: some worker of cluster {n} receives no dataset"
            )
        gamma.append(workers)
    return Placement(K, gamma)


def assign_randomness(params: SystemParams, r1: int, seed: int | None = None) -> RandomnessPlan:
    """Staged random-vector assignment with a within-cluster repetition ladder.

    Clusters are visited in decreasing order of ``N2 - s2``; each is topped up
    to ``N2 - s2`` distinct vectors and every new vector is copied to the
    ``r1`` other clusters holding the fewest vectors so far (ties broken by
    cluster index, or by a seeded permutation when ``seed`` is given). Inside a
    cluster the first ``N2 - s2`` vectors get nested worker windows of sizes
    ``N2, N2-1, ..., s2+1``; any surplus vector gets a cyclic window of size
    ``s2+1``.
    """
    if not params.private:
        raise ModeError("random-vector assignment is only defined in private mode")
    N1 = params.N1
    if not params.s1 + 1 <= r1 <= N1 - 1:
        raise UnsupportedConfigError(
            f"r1 must lie in [s1+1, N1-1] = [{params.s1 + 1}, {N1 - 1}], got {r1}"
        )
    tie_rank = list(range(N1))
    if seed is not None:
        random.Random(seed).shuffle(tie_rank)

    need = [N - s for N, s in zip(params.N2, params.s2)]
    order = sorted(range(N1), key=lambda n: (-need[n], n))
    members = [[] for _ in range(N1)]
    K_prime = 0
    for c in order:
        for _ in range(need[c] - len(members[c])):
            k = K_prime
            K_prime += 1
            others = sorted((m for m in range(N1) if m != c), key=lambda m: (len(members[m]), tie_rank[m]))
            for m in [c] + others[:r1]:
                members[m].append(k)

    gamma_prime = []
    for n in range(N1):
        N2, s2 = params.N2[n], params.s2[n]
        vecs = sorted(members[n])
        workers = [set() for _ in range(N2)]
        ladder = N2 - s2
        for t, k in enumerate(vecs[:ladder]):
            for j in range(N2 - t):
                workers[j].add(k)
        for i, k in enumerate(vecs[ladder:]):
            start = i * (s2 + 1) % N2
            for t in range(s2 + 1):
                workers[(start + t) % N2].add(k)
        gamma_prime.append(workers)
    return RandomnessPlan(K_prime, gamma_prime)


def validate_randomness(plan: RandomnessPlan, params: SystemParams, r1: int) -> Report:
    """Check every random-assignment requirement; never raises on violations."""
    report = Report()
    shape_ok = len(plan.gamma_prime) == params.N1 and tuple(
        len(c) for c in plan.gamma_prime
    ) == params.N2
    report.add("shape", shape_ok, "" if shape_ok else "plan does not match the topology")
    if not shape_ok:
        return report

    clusters = plan.cluster_sets()
    counts = [sum(k in c for c in clusters) for k in range(plan.K_prime)]
    bad = [k for k, c in enumerate(counts) if c != r1 + 1]
    report.add(
        "cluster_repetition",
        not bad,
        f"vectors {bad} are not in exactly r1+1={r1 + 1} clusters" if bad else "",
    )

    short = [n for n, c in enumerate(clusters) if len(c) < params.N2[n] - params.s2[n]]
    report.add(
        "distinct_per_cluster",
        not short,
        f"clusters {short} hold fewer than N2-s2 distinct vectors" if short else "",
    )

    need = max(N - s for N, s in zip(params.N2, params.s2))
    report.add(
        "vector_count",
        plan.K_prime >= need and sum(len(c) for c in clusters) == (r1 + 1) * plan.K_prime,
        f"K'={plan.K_prime}, need K' >= {need} and sum |Gamma'_n| = (r1+1)K'",
    )

    min_bad, ladder_bad = [], []
    for n, (cl, gamma_n) in enumerate(zip(plan.gamma_prime, clusters)):
        s2, N2 = params.s2[n], params.N2[n]
        reps = {k: sum(k in ws for ws in cl) for k in gamma_n}
        if not reps or min(reps.values()) != s2 + 1:
            min_bad.append(n)
        if not set(range(s2 + 1, N2 + 1)) <= set(reps.values()):
            ladder_bad.append(n)
    report.add(
        "min_within_cluster_repetition",
        not min_bad,
        f"clusters {min_bad} do not have minimum repetition s2+1" if min_bad else "",
    )
    report.add(
        "ladder",
        not ladder_bad,
        f"clusters {ladder_bad} miss a repetition value in [s2+1, N2]" if ladder_bad else "",
    )
    return report
