"""Prime-field arithmetic and small dense linear algebra over F_q.

Scalars are plain Python ints kept in ``[0, q)``; vectors are ``int64`` numpy
arrays. The modulus is bounded so that ``(q-1)**2 + (q-1)`` fits in a signed
64-bit integer, which lets a multiply-accumulate step run without overflow.
"""

from __future__ import annotations

import operator
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np
from sympy import isprime

from .errors import ConfigurationError, FieldZeroDivisionError

DEFAULT_Q = 2147483647  # 2**31 - 1
MAX_Q = 3037000499  # largest q with (q-1)**2 + q - 1 < 2**63


@lru_cache(maxsize=64)
def check_modulus(q: int) -> int:
    """Validate that ``q`` is a usable prime modulus and return it."""
    if not isinstance(q, (int, np.integer)) or isinstance(q, bool):
        raise ConfigurationError(f"field modulus must be an integer, got {q!r}")
    q = int(q)
    if q < 2 or not isprime(q):
        raise ConfigurationError(f"field modulus q={q} is not prime")
    if q > MAX_Q:
        raise ConfigurationError(f"field modulus q={q} exceeds the supported bound {MAX_Q}")
    return q


def from_int(v: int, q: int) -> int:
    return int(v) % q


def inv(a: int, q: int) -> int:
    a %= q
    if a == 0:
        raise FieldZeroDivisionError("zero has no inverse in F_q")
    return pow(a, q - 2, q)


def frac(value, q: int) -> int:
    """Map a rational (``Fraction``, int or ``"num/den"`` string) into F_q."""
    value = Fraction(value)
    return value.numerator * inv(value.denominator, q) % q


@dataclass(frozen=True)
class FieldElement:
    value: int
    q: int

    def __post_init__(self):
        if not 0 <= self.value < self.q:
            raise ConfigurationError(f"{self.value} is not reduced modulo {self.q}")

    def _other(self, other) -> int:
        if isinstance(other, FieldElement):
            if other.q != self.q:
                raise ConfigurationError(
                    f"mismatched moduli: F_{self.q} and F_{other.q}"
                )
            return other.value
        if isinstance(other, (int, np.integer)):
            return int(other) % self.q
        return NotImplemented

    def _binary(self, other, fn):
        b = self._other(other)
        if b is NotImplemented:
            return NotImplemented
        return FieldElement(fn(self.value, b) % self.q, self.q)

    def __add__(self, other):
        return self._binary(other, operator.add)

    __radd__ = __add__

    def __sub__(self, other):
        return self._binary(other, operator.sub)

    def __rsub__(self, other):
        return self._binary(other, lambda a, b: b - a)

    def __mul__(self, other):
        return self._binary(other, operator.mul)

    __rmul__ = __mul__

    def __neg__(self):
        return FieldElement(-self.value % self.q, self.q)

    def inverse(self) -> FieldElement:
        return FieldElement(inv(self.value, self.q), self.q)

    def __truediv__(self, other):
        b = self._other(other)
        if b is NotImplemented:
            return NotImplemented
        return FieldElement(self.value * inv(b, self.q) % self.q, self.q)

    def __int__(self):
        return self.value

    def __repr__(self):
        return f"FieldElement({self.value}, q={self.q})"


def fe_from_int(v: int, q: int) -> FieldElement:
    return FieldElement(from_int(v, q), q)


_ARITH = {"add": operator.add, "sub": operator.sub, "mul": operator.mul}


def fe_arith(op: str, a: FieldElement, b: FieldElement) -> FieldElement:
    if op not in _ARITH:
        raise ValueError(f"unknown field operation {op!r}")
    if a.q != b.q:
        raise ConfigurationError(f"mismatched moduli: F_{a.q} and F_{b.q}")
    return FieldElement(_ARITH[op](a.value, b.value) % a.q, a.q)


def fe_inv(a: FieldElement) -> FieldElement:
    return a.inverse()


# -- vectors ---------------------------------------------------------------


def as_vector(values, q: int) -> np.ndarray:
    """Reduce an integer array-like (any shape) into ``int64`` over F_q."""
    if isinstance(values, np.ndarray) and values.dtype.kind == "i":
        return np.mod(values.astype(np.int64), q)
    arr = np.array(values, dtype=object)
    flat = [int(v) % q for v in arr.ravel()]
    return np.array(flat, dtype=np.int64).reshape(arr.shape)


def lincomb(terms, q: int, width: int) -> np.ndarray:
    """Return ``sum(c * v)`` over ``(c, v)`` pairs, reduced modulo ``q``."""
    acc = np.zeros(width, dtype=np.int64)
    for c, v in terms:
        c %= q
        if c:
            acc = (acc + c * v) % q
    return acc


def dot(u: np.ndarray, v: np.ndarray, q: int) -> int:
    return int(np.sum((u * v) % q) % q)


# -- matrices (lists of lists of ints) -------------------------------------


def rref(matrix, q: int):
    """Reduced row-echelon form over F_q.

    Returns ``(rows, pivots)`` where ``rows`` is a new list-of-lists.
    """
    m = [[int(x) % q for x in row] for row in matrix]
    if not m:
        return m, []
    ncols = len(m[0])
    pivots = []
    r = 0
    for c in range(ncols):
        pivot = next((i for i in range(r, len(m)) if m[i][c]), None)
        if pivot is None:
            continue
        m[r], m[pivot] = m[pivot], m[r]
        scale = inv(m[r][c], q)
        m[r] = [x * scale % q for x in m[r]]
        for i in range(len(m)):
            if i != r and m[i][c]:
                f = m[i][c]
                m[i] = [(x - f * y) % q for x, y in zip(m[i], m[r])]
        pivots.append(c)
        r += 1
        if r == len(m):
            break
    return m, pivots


def rank(matrix, q: int) -> int:
    return len(rref(matrix, q)[1])


def solve(a, b, q: int):
    """One solution ``x`` of ``a @ x = b`` over F_q, or ``None`` if inconsistent."""
    aug = [list(row) + [bi] for row, bi in zip(a, b)]
    ncols = len(a[0]) if a else 0
    m, pivots = rref(aug, q)
    if ncols in pivots:
        return None
    x = [0] * ncols
    for row, c in zip(m, pivots):
        x[c] = row[ncols]
    return x


def null_space(matrix, q: int):
    """Basis of ``{x : matrix @ x = 0}`` as a list of vectors."""
    if not matrix:
        return []
    ncols = len(matrix[0])
    m, pivots = rref(matrix, q)
    free = [c for c in range(ncols) if c not in pivots]
    basis = []
    for f in free:
        x = [0] * ncols
        x[f] = 1
        for row, c in zip(m, pivots):
            x[c] = -row[f] % q
        basis.append(x)
    return basis


def left_null_space(matrix, q: int):
    """Basis of ``{u : u^T @ matrix = 0}``."""
    if not matrix:
        return []
    transposed = [list(col) for col in zip(*matrix)]
    if not transposed:
        # zero columns: every row vector is in the left null space
        return [[int(i == j) for j in range(len(matrix))] for i in range(len(matrix))]
    return null_space(transposed, q)
