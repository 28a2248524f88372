"""Vector-valued polynomials over F_q: evaluation, interpolation, decoding.

A ``VectorPolynomial`` stores one coefficient vector per monomial, so each
coordinate is an ordinary scalar polynomial and every operation here acts
componentwise.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from . import gf
from .errors import (
    ArityError,
    DecodingError,
    InsufficientEvaluationsError,
    InvalidInputError,
)

PROJECTION_RETRIES = 3


class EvalPoint(NamedTuple):
    x: int
    y: np.ndarray


@dataclass(frozen=True, eq=False)
class VectorPolynomial:
    coeffs: np.ndarray  # shape (number of monomials, width)
    q: int

    @property
    def width(self) -> int:
        return self.coeffs.shape[1]

    @property
    def degree(self) -> float:
        nonzero = np.flatnonzero(self.coeffs.any(axis=1))
        return int(nonzero[-1]) if nonzero.size else float("-inf")

    def __call__(self, x: int) -> np.ndarray:
        return eval_at(self, x)

    def __eq__(self, other):
        if not isinstance(other, VectorPolynomial) or other.q != self.q:
            return NotImplemented
        if other.width != self.width:
            return False
        n = max(len(self.coeffs), len(other.coeffs))
        return np.array_equal(_pad_rows(self.coeffs, n), _pad_rows(other.coeffs, n))

    __hash__ = None


def _pad_rows(c: np.ndarray, n: int) -> np.ndarray:
    if len(c) >= n:
        return c
    return np.vstack([c, np.zeros((n - len(c), c.shape[1]), dtype=np.int64)])


def zero_polynomial(width: int, q: int) -> VectorPolynomial:
    return VectorPolynomial(np.zeros((1, width), dtype=np.int64), q)


def eval_at(p: VectorPolynomial, x: int) -> np.ndarray:
    """Horner evaluation, componentwise."""
    x %= p.q
    acc = np.zeros(p.width, dtype=np.int64)
    for c in p.coeffs[::-1]:
        acc = (acc * x + c) % p.q
    return acc


# -- scalar polynomial helpers (coefficient lists, lowest degree first) -----


def poly_mul(a: Sequence[int], b: Sequence[int], q: int) -> list[int]:
    out = [0] * (len(a) + len(b) - 1)
    for i, ai in enumerate(a):
        if ai:
            for j, bj in enumerate(b):
                out[i + j] = (out[i + j] + ai * bj) % q
    return out


def poly_from_roots(roots: Sequence[int], q: int) -> list[int]:
    out = [1]
    for r in roots:
        out = poly_mul(out, [-r % q, 1], q)
    return out


def poly_eval(c: Sequence[int], x: int, q: int) -> int:
    acc = 0
    for ci in reversed(c):
        acc = (acc * x + ci) % q
    return acc


def poly_divmod(num: Sequence[int], den: Sequence[int], q: int):
    """Long division; ``den`` must have a nonzero leading coefficient."""
    num = [v % q for v in num]
    den = [v % q for v in den]
    while len(den) > 1 and den[-1] == 0:
        den.pop()
    lead_inv = gf.inv(den[-1], q)
    quot = [0] * max(len(num) - len(den) + 1, 1)
    for i in range(len(num) - len(den), -1, -1):
        c = num[i + len(den) - 1] * lead_inv % q
        quot[i] = c
        if c:
            for j, dj in enumerate(den):
                num[i + j] = (num[i + j] - c * dj) % q
    rem = num[: len(den) - 1] or [0]
    return quot, rem


def lagrange_basis(xs: Sequence[int], q: int) -> list[list[int]]:
    """Coefficient lists of the Lagrange basis polynomials on ``xs``."""
    full = poly_from_roots(xs, q)
    basis = []
    for i, xi in enumerate(xs):
        # synthetic division of full by (x - xi)
        numer = [0] * len(xs)
        carry = 0
        for t in range(len(xs), 0, -1):
            carry = (full[t] + carry * xi) % q if t < len(xs) else full[t]
            numer[t - 1] = carry
        denom = 1
        for m, xm in enumerate(xs):
            if m != i:
                denom = denom * (xi - xm) % q
        scale = gf.inv(denom, q)
        basis.append([c * scale % q for c in numer])
    return basis


def _check_points(points, q):
    xs = [int(p.x) % q for p in points]
    if len(set(xs)) != len(xs):
        raise InvalidInputError("evaluation points must have pairwise-distinct x")
    widths = {len(p.y) for p in points}
    if len(widths) > 1:
        raise InvalidInputError("evaluation vectors have different lengths")
    return xs


def interpolate(points: Sequence[EvalPoint], degree_bound: int, q: int) -> VectorPolynomial:
    """The unique polynomial of degree < ``degree_bound`` through ``points``."""
    if degree_bound < 1:
        raise ArityError("degree bound must be at least 1")
    if len(points) != degree_bound:
        raise ArityError(f"expected {degree_bound} points, got {len(points)}")
    xs = _check_points(points, q)
    width = len(points[0].y)
    basis = lagrange_basis(xs, q)
    coeffs = np.empty((degree_bound, width), dtype=np.int64)
    for t in range(degree_bound):
        coeffs[t] = gf.lincomb(((b[t], p.y) for b, p in zip(basis, points)), q, width)
    return VectorPolynomial(coeffs, q)


def _berlekamp_welch(xs, ys, degree_bound, max_errors, q):
    """Scalar Berlekamp-Welch. Returns coefficients of the unique polynomial of
    degree < degree_bound agreeing with at least ``len(xs) - max_errors`` of the
    points, or ``None`` if there is none."""
    n, e = len(xs), max_errors
    n_q = degree_bound + e
    rows, rhs = [], []
    for x, y in zip(xs, ys):
        powers = [pow(x, t, q) for t in range(n_q + 1)]
        rows.append(powers[:n_q] + [-y * powers[t] % q for t in range(e)])
        rhs.append(y * powers[e] % q)
    sol = gf.solve(rows, rhs, q)
    if sol is None:
        return None
    quot, rem = poly_divmod(sol[:n_q], sol[n_q:] + [1], q)
    if any(rem):
        return None
    f = (quot + [0] * degree_bound)[:degree_bound]
    if any(quot[degree_bound:]):
        return None
    agree = sum(poly_eval(f, x, q) == y for x, y in zip(xs, ys))
    return f if agree >= n - e else None


def _disagreements(p: VectorPolynomial, points, xs):
    return [x for x, pt in zip(xs, points) if not np.array_equal(eval_at(p, x), pt.y)]


def error_erasure_decode(
    points: Sequence[EvalPoint],
    degree_bound: int,
    max_errors: int,
    q: int,
    seed: int = 0,
):
    """Decode a polynomial of degree < ``degree_bound`` from evaluations of which
    at most ``max_errors`` are wrong (missing evaluations are simply absent).

    Returns ``(polynomial, corrupted_x)`` where ``corrupted_x`` is the frozenset
    of x-coordinates whose value disagrees with the decoded polynomial.

    Errors are located on a scalar projection of the vectors (random linear
    functional drawn from ``seed``) with Berlekamp-Welch, then the vectors are
    interpolated from the surviving points and checked. A projection that hides
    a corruption is re-drawn; after a few attempts decoding falls back to
    running Berlekamp-Welch on every coordinate.
    """
    if degree_bound < 1 or max_errors < 0:
        raise InvalidInputError("need degree_bound >= 1 and max_errors >= 0")
    xs = _check_points(points, q)
    needed = degree_bound + 2 * max_errors
    if len(points) < needed:
        raise InsufficientEvaluationsError(
            f"need at least {needed} evaluations, got {len(points)}"
        )
    width = len(points[0].y)
    threshold = len(points) - max_errors

    if max_errors == 0:
        p = interpolate(points[:degree_bound], degree_bound, q)
        bad = _disagreements(p, points, xs)
        if bad:
            raise DecodingError(f"{len(bad)} evaluations inconsistent with degree < {degree_bound}")
        return p, frozenset()

    ys = np.vstack([p.y for p in points])
    rng = np.random.default_rng(seed)
    for _ in range(PROJECTION_RETRIES):
        r = rng.integers(1, q, size=width, dtype=np.int64)
        scalars = [int(v) for v in ((ys * r) % q).sum(axis=1) % q]
        f = _berlekamp_welch(xs, scalars, degree_bound, max_errors, q)
        if f is None:
            # the projection of a valid codeword would have decoded
            raise DecodingError(f"more than {max_errors} corrupted evaluations")
        good = [pt for x, y, pt in zip(xs, scalars, points) if poly_eval(f, x, q) == y]
        p = interpolate(good[:degree_bound], degree_bound, q)
        bad = _disagreements(p, points, xs)
        if len(bad) <= max_errors:
            return p, frozenset(bad)

    coeffs = np.empty((degree_bound, width), dtype=np.int64)
    for c in range(width):
        f = _berlekamp_welch(xs, [int(v) for v in ys[:, c]], degree_bound, max_errors, q)
        if f is None:
            raise DecodingError(f"more than {max_errors} corrupted evaluations")
        coeffs[:, c] = f
    p = VectorPolynomial(coeffs, q)
    bad = _disagreements(p, points, xs)
    if len(bad) > max_errors or len(points) - len(bad) < threshold:
        raise DecodingError(f"more than {max_errors} corrupted evaluations")
    return p, frozenset(bad)
