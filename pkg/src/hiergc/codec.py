"""Worker, relay and server encoding/decoding for hierarchical gradient coding.

Two polynomials drive the scheme. The cluster-to-server polynomial is
evaluated by relay ``n`` at ``alpha1[n]`` and by the server at the ``beta1``
points, where it equals the partition sums of the gradient. The intra-cluster
polynomial of cluster ``n`` is evaluated by worker ``(n, j)`` at
``alpha2[n][j]`` and by the relay at the ``beta2[n]`` points, where it equals
the relay's own message. Every factor that would reference a node lacking a
dataset is a Lagrange term vanishing at that node, which is what keeps each
encoding local.

All coefficients are computed in closed form as products of Lagrange factors
and cached per (node, placement, plan, params).

Private mode adds shared random vectors ``z_k``. Their server-layer term is
multiplied by ``prod_u (x - beta1[u])`` so it vanishes at every ``beta1``
point, and the within-cluster assignment keeps the relay from cancelling it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable

import numpy as np

from . import gf
from .errors import (
    AdversaryBudgetExceededError,
    ConfigurationError,
    DecodingError,
    InvalidInputError,
    ModeError,
)
from .placement import EvalPlan, Placement, RandomnessPlan, SystemParams, margins
from .poly import EvalPoint, error_erasure_decode, eval_at


def padded_length(d: int, m1: int, m2: Iterable[int]) -> int:
    """Smallest multiple of ``m1 * lcm(m2)`` that is at least ``d``."""
    block = m1 * math.lcm(*m2)
    return -(-d // block) * block


@dataclass(frozen=True, eq=False)
class GradientSet:
    """``K`` zero-padded partial gradients with partition views."""

    g: np.ndarray  # (K, d_padded)
    d: int
    m1: int
    m2: tuple
    q: int

    @property
    def K(self) -> int:
        return self.g.shape[0]

    @property
    def d_padded(self) -> int:
        return self.g.shape[1]

    def part(self, k: int, l1: int) -> np.ndarray:
        w = self.d_padded // self.m1
        return self.g[k, l1 * w : (l1 + 1) * w]

    def subpart(self, k: int, l1: int, l2: int, n: int) -> np.ndarray:
        w = self.d_padded // (self.m1 * self.m2[n])
        return self.part(k, l1)[l2 * w : (l2 + 1) * w]

    def total(self) -> np.ndarray:
        """Direct sum of the unpadded partial gradients."""
        return np.sum(self.g[:, : self.d] % self.q, axis=0, dtype=np.int64) % self.q


def partition_pad(g, m1: int, m2: Iterable[int], q: int) -> GradientSet:
    g = gf.as_vector(g, q)
    if g.ndim != 2 or g.shape[1] < 1:
        raise InvalidInputError("gradient table must be K x d with d >= 1")
    m2 = tuple(m2)
    d = g.shape[1]
    dp = padded_length(d, m1, m2)
    padded = np.zeros((g.shape[0], dp), dtype=np.int64)
    padded[:, :d] = g
    return GradientSet(padded, d, m1, m2, q)


@dataclass(frozen=True, eq=False)
class RandomnessSet:
    """Shared random vectors ``z_k`` (rows of ``z``), split into ``m1`` parts."""

    z: np.ndarray  # (K_prime, d_padded)
    m1: int
    seed: int | None = None

    @property
    def K_prime(self) -> int:
        return self.z.shape[0]

    def part(self, k: int, l1: int) -> np.ndarray:
        w = self.z.shape[1] // self.m1
        return self.z[k, l1 * w : (l1 + 1) * w]


def generate_randomness(K_prime: int, d_padded: int, m1: int, q: int, seed: int) -> RandomnessSet:
    rng = np.random.default_rng(seed)
    z = rng.integers(0, q, size=(K_prime, d_padded), dtype=np.int64)
    return RandomnessSet(z, m1, seed)


@dataclass(frozen=True, eq=False)
class Message:
    sender: tuple  # ("worker", n, j) or ("relay", n)
    payload: np.ndarray
    corrupted: bool = False  # simulator diagnostics only; decoders never read it


# -- closed-form coefficients ------------------------------------------------


def _vanishing(x: int, roots: Iterable[int], target: int, q: int) -> int:
    """prod over roots r of (x - r) / (target - r)."""
    num = den = 1
    for r in roots:
        num = num * (x - r) % q
        den = den * (target - r) % q
    return num * gf.inv(den, q) % q


def _lagrange_at(x: int, nodes: tuple, i: int, q: int) -> int:
    """Lagrange basis polynomial of ``nodes[i]`` evaluated at ``x``."""
    return _vanishing(x, nodes[:i] + nodes[i + 1 :], nodes[i], q)


@lru_cache(maxsize=None)
def _setup(placement: Placement, plan: EvalPlan, params: SystemParams):
    m1, m2 = margins(params, placement)
    plan.check_shape(params, m1, m2)
    if plan.q != params.q:
        raise ConfigurationError("evaluation plan and parameters use different fields")
    return m1, m2


@lru_cache(maxsize=None)
def _server_factors(n: int, plan: EvalPlan, params: SystemParams, clusters_of: tuple):
    """Per ``(k, l1)``: prod_{i not holding k} (alpha_n - alpha_i)/(beta_l1 - alpha_i)."""
    q = params.q
    an = plan.alpha1[n]
    out = {}
    for k, holders in enumerate(clusters_of):
        if n not in holders:
            continue
        roots = [plan.alpha1[i] for i in range(params.N1) if i not in holders]
        for l1, b in enumerate(plan.beta1):
            out[k, l1] = _vanishing(an, roots, b, q)
    return out


def _holders(sets: tuple, count: int) -> tuple:
    return tuple(frozenset(n for n, s in enumerate(sets) if k in s) for k in range(count))


@lru_cache(maxsize=None)
def relay_coefficients(n: int, placement: Placement, plan: EvalPlan, params: SystemParams) -> dict:
    """Coefficient of ``g_k[l1]`` in relay ``n``'s message, keyed by ``(k, l1)``."""
    q = params.q
    m1, _ = _setup(placement, plan, params)
    factors = _server_factors(n, plan, params, _holders(placement.cluster_sets(), placement.K))
    an = plan.alpha1[n]
    beta_lagrange = [_lagrange_at(an, plan.beta1, l1, q) for l1 in range(m1)]
    return {(k, l1): c * beta_lagrange[l1] % q for (k, l1), c in factors.items()}


@lru_cache(maxsize=None)
def relay_randomness_coefficients(
    n: int, rand_plan: RandomnessPlan, plan: EvalPlan, params: SystemParams
) -> dict:
    """Coefficient of ``z_k[l1]`` in relay ``n``'s private message."""
    q = params.q
    factors = _server_factors(
        n, plan, params, _holders(rand_plan.cluster_sets(), rand_plan.K_prime)
    )
    an = plan.alpha1[n]
    vanish = 1
    for b in plan.beta1:
        vanish = vanish * (an - b) % q
    return {key: c * vanish % q for key, c in factors.items()}


@lru_cache(maxsize=None)
def worker_coefficients(
    n: int, j: int, placement: Placement, plan: EvalPlan, params: SystemParams
) -> dict:
    """Coefficient of ``g_k[l1, l2]`` in worker ``(n, j)``'s message.

    Only datasets held by the worker get a nonzero coefficient.
    """
    q = params.q
    _, m2 = _setup(placement, plan, params)
    alpha, beta = plan.alpha2[n], plan.beta2[n]
    x = alpha[j]
    cluster = placement.gamma[n]
    beta_lagrange = [_lagrange_at(x, beta, l2, q) for l2 in range(m2[n])]
    out = {}
    for (k, l1), c in relay_coefficients(n, placement, plan, params).items():
        if k not in cluster[j]:
            continue
        roots = [alpha[jj] for jj, ws in enumerate(cluster) if k not in ws]
        for l2 in range(m2[n]):
            coef = c * _vanishing(x, roots, beta[l2], q) * beta_lagrange[l2] % q
            if coef:
                out[k, l1, l2] = coef
    return out


@lru_cache(maxsize=None)
def worker_randomness_coefficients(
    n: int, j: int, rand_plan: RandomnessPlan, plan: EvalPlan, params: SystemParams
) -> dict:
    """Coefficient of ``z_k[l1]`` in worker ``(n, j)``'s private message."""
    q = params.q
    alpha, b = plan.alpha2[n], plan.beta2[n][0]
    x = alpha[j]
    cluster = rand_plan.gamma_prime[n]
    out = {}
    for (k, l1), c in relay_randomness_coefficients(n, rand_plan, plan, params).items():
        if k not in cluster[j]:
            continue
        roots = [alpha[jj] for jj, ws in enumerate(cluster) if k not in ws]
        coef = c * _vanishing(x, roots, b, q) % q
        if coef:
            out[k, l1] = coef
    return out


# -- encoders --------------------------------------------------------------


def _require_mode(params: SystemParams, private: bool):
    if params.private != private:
        want = "private" if private else "plain"
        raise ModeError(f"operation requires {want} mode, params are {params.mode}")


def _check_grads(grads: GradientSet, placement: Placement, m1, m2):
    if grads.K != placement.K or grads.m1 != m1 or tuple(grads.m2) != tuple(m2):
        raise InvalidInputError("gradient set does not match the placement's partitioning")


def worker_encode(
    n: int, j: int, grads: GradientSet, placement: Placement, plan: EvalPlan, params: SystemParams
) -> Message:
    _require_mode(params, private=False)
    m1, m2 = _setup(placement, plan, params)
    _check_grads(grads, placement, m1, m2)
    width = grads.d_padded // (m1 * m2[n])
    coeffs = worker_coefficients(n, j, placement, plan, params)
    payload = gf.lincomb(
        ((c, grads.subpart(k, l1, l2, n)) for (k, l1, l2), c in coeffs.items()), params.q, width
    )
    return Message(("worker", n, j), payload)


def worker_encode_private(
    n: int,
    j: int,
    grads: GradientSet,
    rand: RandomnessSet,
    placement: Placement,
    rand_plan: RandomnessPlan,
    plan: EvalPlan,
    params: SystemParams,
) -> Message:
    _require_mode(params, private=True)
    m1, m2 = _setup(placement, plan, params)
    _check_grads(grads, placement, m1, m2)
    if rand.K_prime != rand_plan.K_prime or rand.z.shape[1] != grads.d_padded:
        raise InvalidInputError("randomness set does not match the plan or gradient length")
    width = grads.d_padded // m1
    terms = [(c, grads.part(k, l1)) for (k, l1, _), c in worker_coefficients(n, j, placement, plan, params).items()]
    terms += [
        (c, rand.part(k, l1))
        for (k, l1), c in worker_randomness_coefficients(n, j, rand_plan, plan, params).items()
    ]
    return Message(("worker", n, j), gf.lincomb(terms, params.q, width))


def relay_reference(
    n: int,
    grads: GradientSet,
    placement: Placement,
    plan: EvalPlan,
    params: SystemParams,
    rand: RandomnessSet | None = None,
    rand_plan: RandomnessPlan | None = None,
) -> np.ndarray:
    """Relay ``n``'s honest message computed directly from every gradient."""
    m1, _ = _setup(placement, plan, params)
    terms = [(c, grads.part(k, l1)) for (k, l1), c in relay_coefficients(n, placement, plan, params).items()]
    if params.private:
        terms += [
            (c, rand.part(k, l1))
            for (k, l1), c in relay_randomness_coefficients(n, rand_plan, plan, params).items()
        ]
    return gf.lincomb(terms, params.q, grads.d_padded // m1)


# -- decoders ----------------------------------------------------------------


def _decode(messages, xs_of, degree_bound, max_errors, q, seed, width):
    points = []
    for msg in messages:
        if len(msg.payload) != width:
            raise InvalidInputError(
                f"message from {msg.sender} has length {len(msg.payload)}, expected {width}"
            )
        points.append(EvalPoint(xs_of(msg.sender), msg.payload))
    try:
        return error_erasure_decode(points, degree_bound, max_errors, q, seed=seed)
    except DecodingError as exc:
        raise AdversaryBudgetExceededError(str(exc)) from exc


def _relay(n, received, placement, plan, params, identify):
    m1, m2 = _setup(placement, plan, params)
    q = params.q
    senders = [m.sender for m in received]
    if any(s[0] != "worker" or s[1] != n for s in senders) or len(set(senders)) != len(senders):
        raise InvalidInputError(f"relay {n} received a foreign or duplicated message")
    if params.private:
        degree_bound, errors = params.N2[n] - params.s2[n], 0
    else:
        degree_bound = params.N2[n] - 2 * params.a2[n] - params.s2[n]
        errors = params.a2[n]
    d_padded = padded_length(params.d, m1, m2)
    width = d_padded // (m1 * m2[n])
    alpha = plan.alpha2[n]
    x_to_j = {x: j for j, x in enumerate(alpha)}
    poly, bad = _decode(received, lambda s: alpha[s[2]], degree_bound, errors, q, n, width)
    payload = np.concatenate([eval_at(poly, b) for b in plan.beta2[n]])
    msg = Message(("relay", n), payload)
    if identify:
        return msg, frozenset(x_to_j[x] for x in bad)
    return msg


def relay_aggregate(n, received, placement, plan, params, identify=False):
    """Error-erasure decode the intra-cluster polynomial and evaluate it at ``beta2``.

    With ``identify=True`` also returns the indices of workers whose messages
    disagreed with the decoded polynomial.
    """
    _require_mode(params, private=False)
    return _relay(n, list(received), placement, plan, params, identify)


def relay_aggregate_private(n, received, placement, plan, params, identify=False):
    _require_mode(params, private=True)
    return _relay(n, list(received), placement, plan, params, identify)


def _server(received, placement, plan, params, identify):
    m1, m2 = _setup(placement, plan, params)
    received = list(received)
    senders = [m.sender for m in received]
    if any(s[0] != "relay" for s in senders) or len(set(senders)) != len(senders):
        raise InvalidInputError("server received a foreign or duplicated message")
    width = padded_length(params.d, m1, m2) // m1
    degree_bound = params.N1 - 2 * params.a1 - params.s1
    x_to_n = {x: n for n, x in enumerate(plan.alpha1)}
    poly, bad = _decode(
        received, lambda s: plan.alpha1[s[1]], degree_bound, params.a1, params.q, params.N1, width
    )
    g = np.concatenate([eval_at(poly, b) for b in plan.beta1])[: params.d]
    if identify:
        return g, frozenset(x_to_n[x] for x in bad)
    return g


def server_decode(received, placement, plan, params, identify=False):
    """Recover the (unpadded) sum of all partial gradients from relay messages."""
    _require_mode(params, private=False)
    return _server(received, placement, plan, params, identify)


def server_decode_private(received, placement, plan, params, identify=False):
    _require_mode(params, private=True)
    return _server(received, placement, plan, params, identify)
