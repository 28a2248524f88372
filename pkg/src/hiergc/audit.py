"""Rank audit of the randomness seen by each relay in private mode.

A relay learns nothing about the gradients when the coefficient matrix of the
random vectors in the messages it receives has full row rank: then no linear
combination of those messages cancels the (uniform) randomness.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations

from . import gf
from .codec import (
    relay_randomness_coefficients,
    worker_coefficients,
    worker_randomness_coefficients,
)
from .errors import ConfigurationError, ModeError
from .placement import EvalPlan, Placement, RandomnessPlan, SystemParams
from .poly import poly_from_roots


@dataclass
class CoeffMatrix:
    rows: list  # worker indices j
    cols: list  # (k, l1) pairs
    entries: list  # list of lists of ints
    q: int

    def as_rows(self):
        return [list(r) for r in self.entries]


def _columns(count: int, m1: int):
    return [(k, l1) for k in range(count) for l1 in range(m1)]


def build_randomness_matrix(
    n: int, nonstragglers, rand_plan: RandomnessPlan, plan: EvalPlan, params: SystemParams
) -> CoeffMatrix:
    """Rows: non-straggling workers of cluster ``n``; columns: ``z_k[l1]``."""
    if not params.private:
        raise ModeError("randomness matrices exist only in private mode")
    rows = sorted(nonstragglers)
    cols = _columns(rand_plan.K_prime, len(plan.beta1))
    entries = []
    for j in rows:
        coeffs = worker_randomness_coefficients(n, j, rand_plan, plan, params)
        entries.append([coeffs.get(c, 0) for c in cols])
    return CoeffMatrix(rows, cols, entries, params.q)


def build_gradient_matrix(
    n: int, nonstragglers, placement: Placement, plan: EvalPlan, params: SystemParams
) -> CoeffMatrix:
    """Companion of :func:`build_randomness_matrix` for the ``g_k[l1]`` terms."""
    if not params.private:
        raise ModeError("gradient/randomness split exists only in private mode")
    rows = sorted(nonstragglers)
    cols = _columns(placement.K, len(plan.beta1))
    entries = []
    for j in rows:
        coeffs = {(k, l1): c for (k, l1, _), c in worker_coefficients(n, j, placement, plan, params).items()}
        entries.append([coeffs.get(c, 0) for c in cols])
    return CoeffMatrix(rows, cols, entries, params.q)


def randomness_monomial_matrix(
    n: int, rand_plan: RandomnessPlan, plan: EvalPlan, params: SystemParams
):
    """Monomial coefficients of every randomness coefficient polynomial.

    Returns a ``(N2 - s2) x (K' m1)`` list-of-lists ``C`` with
    ``a_i(x) = sum_t C[t][i] x**t``, built symbolically from the vanishing
    factors rather than by evaluating messages.
    """
    q = params.q
    size = params.N2[n] - params.s2[n]
    alpha, b = plan.alpha2[n], plan.beta2[n][0]
    cluster = rand_plan.gamma_prime[n]
    cols = _columns(rand_plan.K_prime, len(plan.beta1))
    relay = relay_randomness_coefficients(n, rand_plan, plan, params)
    out = [[0] * len(cols) for _ in range(size)]
    for i, (k, l1) in enumerate(cols):
        c = relay.get((k, l1), 0)
        if not c:
            continue
        roots = [alpha[jj] for jj, ws in enumerate(cluster) if k not in ws]
        poly = poly_from_roots(roots, q)
        if len(poly) > size:
            raise ConfigurationError(
                f"z_{k} is held by fewer than s2+1 workers of cluster {n}; degree exceeds N2-s2-1"
            )
        denom = 1
        for r in roots:
            denom = denom * (b - r) % q
        scale = c * gf.inv(denom, q) % q
        for t, pc in enumerate(poly):
            out[t][i] = pc * scale % q
    return out


def vandermonde(xs, size: int, q: int):
    return [[pow(x, t, q) for t in range(size)] for x in xs]


def rank_fq(m: CoeffMatrix) -> int:
    return gf.rank(m.entries, m.q) if m.entries else 0


@dataclass
class PatternResult:
    stragglers: tuple
    rank: int
    rows: int
    full_row_rank: bool


@dataclass
class ClusterAudit:
    cluster: int
    required_rank: int
    patterns: list = field(default_factory=list)  # exactly s2 stragglers
    informational: list = field(default_factory=list)  # fewer than s2 stragglers

    @property
    def passed(self) -> bool:
        return all(p.full_row_rank for p in self.patterns)

    @property
    def failing(self) -> list:
        return [p for p in self.patterns if not p.full_row_rank]

    def to_dict(self) -> dict:
        def pat(p):
            return {
                "stragglers": [j + 1 for j in p.stragglers],
                "rank": p.rank,
                "rows": p.rows,
                "full_row_rank": p.full_row_rank,
            }

        return {
            "cluster": self.cluster + 1,
            "required_rank": self.required_rank,
            "passed": self.passed,
            "patterns": [pat(p) for p in self.patterns],
            "informational": [pat(p) for p in self.informational],
        }


def audit_cluster(
    n: int, rand_plan: RandomnessPlan, plan: EvalPlan, params: SystemParams
) -> ClusterAudit:
    """Check full row rank for every pattern of exactly ``s2`` stragglers in cluster ``n``."""
    N2, s2 = params.N2[n], params.s2[n]
    result = ClusterAudit(n, N2 - s2)
    for size in range(s2, -1, -1):
        for stragglers in combinations(range(N2), size):
            alive = [j for j in range(N2) if j not in stragglers]
            m = build_randomness_matrix(n, alive, rand_plan, plan, params)
            r = rank_fq(m)
            entry = PatternResult(stragglers, r, len(alive), r == len(alive))
            (result.patterns if size == s2 else result.informational).append(entry)
    return result


def audit_all(rand_plan: RandomnessPlan, plan: EvalPlan, params: SystemParams) -> list:
    return [audit_cluster(n, rand_plan, plan, params) for n in range(params.N1)]
