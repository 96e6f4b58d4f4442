"""Even polynomials in the angular frequency and Bell-polynomial machinery.

Every spectral numerator and denominator handled by this package is a real
polynomial in ``w**2``.  :class:`EvenPolynomial` stores the coefficients in
increasing order, ``p(w) = sum_a c[a] * w**(2 a)``.

The denominator ``Q(w) = |det(J + i w I)|**2`` is expanded through the
elementary symmetric polynomials of the squared eigenvalues of ``J``, which
are obtained from trace powers via the Hessenberg determinant form of the
complete Bell polynomial.  No eigendecomposition is used.
"""
from __future__ import annotations

from dataclasses import dataclass
from math import factorial

import numpy as np


class DimensionError(ValueError):
    """Raised when matrix or polynomial shapes are inconsistent."""


@dataclass(frozen=True, eq=False)
class EvenPolynomial:
    """Real polynomial in ``w**2`` with coefficients in increasing order."""

    coeffs: np.ndarray

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.coeffs, dtype=float)).copy()
        if c.ndim != 1 or c.size == 0:
            raise DimensionError("EvenPolynomial needs a non-empty 1-D coefficient list")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    def __len__(self):
        return self.coeffs.size

    def __getitem__(self, k):
        return self.coeffs[k]

    def __iter__(self):
        return iter(self.coeffs)

    def __repr__(self):
        return f"EvenPolynomial({self.coeffs.tolist()!r})"

    @property
    def degree(self) -> int:
        """Degree in ``w**2`` (length minus one, trailing zeros included)."""
        return self.coeffs.size - 1

    def __call__(self, w):
        return eval_even(self, w)

    def __add__(self, other):
        other = _as_poly(other)
        n = max(len(self), len(other))
        out = np.zeros(n)
        out[: len(self)] += self.coeffs
        out[: len(other)] += other.coeffs
        return EvenPolynomial(out)

    __radd__ = __add__

    def __neg__(self):
        return EvenPolynomial(-self.coeffs)

    def __sub__(self, other):
        return self + (-_as_poly(other))

    def __mul__(self, other):
        if np.isscalar(other):
            return EvenPolynomial(self.coeffs * other)
        other = _as_poly(other)
        return EvenPolynomial(np.convolve(self.coeffs, other.coeffs))

    __rmul__ = __mul__

    def __eq__(self, other):
        if not isinstance(other, EvenPolynomial):
            return NotImplemented
        return np.array_equal(self.coeffs, other.coeffs)

    def allclose(self, other, rtol=1e-10, atol=0.0) -> bool:
        other = _as_poly(other)
        n = max(len(self), len(other))
        a = np.pad(self.coeffs, (0, n - len(self)))
        b = np.pad(other.coeffs, (0, n - len(other)))
        return bool(np.allclose(a, b, rtol=rtol, atol=atol))


def _as_poly(p) -> EvenPolynomial:
    if isinstance(p, EvenPolynomial):
        return p
    return EvenPolynomial(p)


def eval_even(p, w):
    """Evaluate an even polynomial at ``w`` by Horner's rule in ``w**2``.

    ``w`` may be a scalar or an array; the result has the same shape.
    """
    c = _as_poly(p).coeffs
    w2 = np.asarray(w, dtype=float) ** 2
    acc = np.full_like(w2, c[-1], dtype=float)
    for a in c[-2::-1]:
        acc = acc * w2 + a
    return acc if acc.ndim else float(acc)


@dataclass(frozen=True)
class TracePowerSequence:
    """Trace powers ``r[k-1] = Tr(A**(2k))`` (squared) or ``Tr(A**k)`` (plain)."""

    r: np.ndarray
    source: str

    def __len__(self):
        return len(self.r)


def _square(A) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {A.shape}")
    return A


def trace_powers(A, k_max: int, squared: bool = True) -> TracePowerSequence:
    """Traces of successive powers of ``A`` by repeated multiplication.

    Parameters
    ----------
    A : (n, n) array_like
    k_max : int
        Number of traces to return.
    squared : bool
        If true entry ``k`` is ``Tr(A**(2k))``, otherwise ``Tr(A**k)``.
    """
    A = _square(A)
    if k_max < 0:
        raise ValueError("k_max must be non-negative")
    base = A @ A if squared else A
    out = np.empty(k_max)
    power = np.eye(A.shape[0])
    for k in range(k_max):
        power = power @ base
        out[k] = np.trace(power)
    return TracePowerSequence(out, "squared" if squared else "plain")


def bell_sequence(r) -> np.ndarray:
    """Complete Bell values ``B(r^k)`` for ``k = 0..len(r)``.

    ``B(r^k)`` is the determinant of the ``k x k`` upper Hessenberg matrix
    with ``-r[j-i]`` on and above the diagonal and ``-i`` on the
    subdiagonal.  It is evaluated with the leading-minor recurrence

        D_k = -sum_{j=1..k} r[k-j] (k-1)!/(j-1)! D_{j-1},   D_0 = 1,

    which costs O(k**2) for the whole sequence.
    """
    r = np.asarray(getattr(r, "r", r), dtype=float)
    k_max = r.size
    D = np.empty(k_max + 1)
    D[0] = 1.0
    for k in range(1, k_max + 1):
        acc = 0.0
        ratio = 1.0  # (k-1)!/(j-1)! for j = k, k-1, ..., 1
        for j in range(k, 0, -1):
            acc += r[k - j] * ratio * D[j - 1]
            ratio *= j - 1
        D[k] = -acc
    return D


def bell_hessenberg(r) -> float:
    """Determinant of the Hessenberg matrix built from the full prefix ``r``."""
    return float(bell_sequence(r)[-1])


def hessenberg_matrix(r) -> np.ndarray:
    """Explicit Hessenberg matrix whose determinant is the Bell value of ``r``."""
    r = np.asarray(getattr(r, "r", r), dtype=float)
    k = r.size
    H = np.zeros((k, k))
    for i in range(k):
        for j in range(i, k):
            H[i, j] = -r[j - i]
        if i > 0:
            H[i, i - 1] = -i
    return H


def elementary_symmetric(r) -> np.ndarray:
    """Elementary symmetric polynomials ``e_0..e_k`` from power sums ``r``.

    ``e_k = (-1)**k / k! * B(r^k)``, the Newton identities in Bell form.
    """
    D = bell_sequence(r)
    return np.array([(-1) ** k * D[k] / factorial(k) for k in range(D.size)])


def shifted_det_coeffs(A) -> np.ndarray:
    """Coefficients ``a_j`` of ``det(A + s I) = sum_j a_j s**j``, increasing order.

    ``a_j = e_{n-j}`` of the eigenvalues of ``A``; a 0 x 0 matrix gives ``[1]``.
    """
    A = _square(A) if np.size(A) else np.zeros((0, 0))
    n = A.shape[0]
    e = elementary_symmetric(trace_powers(A, n, squared=False))
    return e[::-1].copy()


def denominator_coeffs(J) -> EvenPolynomial:
    """Coefficients ``q_0..q_n`` of ``Q(w) = |det(J + i w I)|**2``.

    ``q_a = (-1)**(n-a) / (n-a)! * B(r^{n-a}(J**2))`` with ``q_n = 1``.
    """
    J = _square(J) if np.size(J) else np.zeros((0, 0))
    n = J.shape[0]
    e = elementary_symmetric(trace_powers(J, n, squared=True))
    return EvenPolynomial(e[::-1])
