"""Element-wise spectrum coefficients from Jacobian submatrices.

Each entry of the numerator ``adj(J + iwI) C adj(J + iwI)^H`` is a sum of
products of determinants ``|O + iw(I - E_beta)|`` over row/column-exchanged
minors ``O`` of ``J``.  The products are expanded by six canonical functions
(``d``, ``g``, ``h``, ``f``, ``s``, ``t``) whose coefficients come from Bell
polynomials of trace powers, so no determinant is ever sampled.

Indices are zero-based throughout.  Odd-power parts (``g1``, ``h2``,
``s2``, ``t2`` and the ``pp`` numerator) are stored as the coefficients of
``w**(2a + 1)`` in an :class:`EvenPolynomial`, i.e. the polynomial that
multiplies ``w`` (or ``i w``).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .poly import DimensionError, EvenPolynomial, denominator_coeffs, shifted_det_coeffs
from .system import LtiSystem, build_covariance, ldl_reduce


@dataclass(frozen=True, eq=False)
class SubmatrixSet:
    """Exchanged minor ``O`` of ``J`` for element ``(i, j)``.

    ``beta`` is the diagonal position that carries no ``iw`` shift (``None``
    when ``i == j``), ``Oprime`` is ``O`` with row and column ``beta``
    removed, and ``sign_exchanges`` counts the adjacent row or column swaps
    that turn the plain minor into ``O``.
    """

    O: np.ndarray
    Oprime: Optional[np.ndarray]
    beta: Optional[int]
    sign_exchanges: int
    i: int
    j: int


@dataclass(frozen=True, eq=False)
class ElementCoeffs:
    """Numerator ``p(w) + i w pp(w)`` of one spectrum entry."""

    p: EvenPolynomial
    pp: EvenPolynomial
    i: int
    j: int


def _check_square(A, name="A") -> np.ndarray:
    A = np.asarray(A, dtype=float)
    if A.size == 0:
        return np.zeros((0, 0))
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionError(f"{name} must be square, got shape {A.shape}")
    return A


def _delete(A, k):
    return np.delete(np.delete(A, k, axis=0), k, axis=1)


def build_O(J, i: int, j: int) -> SubmatrixSet:
    """Minor of ``J`` without row ``i`` and column ``j``, rearranged so that
    every surviving diagonal entry of ``J`` sits on the diagonal.

    For ``i > j`` the columns ``j..i-1`` of the minor are rotated right by
    one; for ``i < j`` the rows ``i..j-1`` are rotated down by one.  Either
    way ``|i - j| - 1`` adjacent exchanges are made and the diagonal slot
    left without a shift is ``beta = min(i, j)``.
    """
    J = _check_square(J, "J")
    n = J.shape[0]
    if not (0 <= i < n and 0 <= j < n):
        raise IndexError(f"element ({i}, {j}) out of range for n={n}")
    N = np.delete(np.delete(J, i, axis=0), j, axis=1)
    if i == j:
        return SubmatrixSet(N, None, None, 0, i, j)
    O = N.copy()
    if i > j:
        O[:, j:i] = np.roll(N[:, j:i], 1, axis=1)
    else:
        O[i:j, :] = np.roll(N[i:j, :], 1, axis=0)
    beta = min(i, j)
    return SubmatrixSet(O, _delete(O, beta), beta, abs(i - j) - 1, i, j)


# Bell-polynomial building blocks -------------------------------------------

def _det_coeffs(A) -> np.ndarray:
    """``a_j`` with ``|A + sI| = sum_j a_j s**j`` (Bell form of the e.s.p.)."""
    return shifted_det_coeffs(A) if np.size(A) else np.ones(1)


def _signed_product(a, b):
    """Coefficients in ``w`` of ``conj(|A + iwI|) |B + iwI|``.

    Entry ``s`` equals ``i**s * sum_{j+l=s} (-1)**j a_j b_l``, the Bell-sum
    form of the canonical functions collected by a single convolution.
    """
    ja = np.arange(a.size)
    jb = np.arange(b.size)
    return np.convolve(a * (-1j) ** ja, b * 1j ** jb)


def _g_parts(a, b):
    """Coefficients of ``2 w conj(|A + iwI|) |B + iwI|`` from ``a`` (k+1) and ``b`` (k).

    ``g1[al] = 2 sum_{j+l=2al} (-1)^(al+j) a_j b_l`` and
    ``g2[al] = 2 sum_{j+l=2al-1} (-1)^(al+j+1) a_j b_l``.
    """
    k = a.size - 1
    c = _signed_product(a, b) if k else np.zeros(0, complex)
    g1 = 2.0 * c[0::2].real
    g2 = np.zeros(k + 1)
    g2[1:] = 2.0 * c[1::2].imag
    return g1[:k], g2


def _h_parts(a, b):
    """Coefficients of ``2 conj(|A + iwI|) |B + iwI|`` from ``a`` and ``b`` (both k+1).

    ``h1[al] = 2 sum_{j+l=2al} (-1)^(al+j) a_j b_l`` and ``h2`` the same over
    ``j+l = 2al+1``.
    """
    c = _signed_product(a, b)
    return 2.0 * c[0::2].real, 2.0 * c[1::2].imag


def _shift(c):
    """Multiply a coefficient list in ``w**2`` by ``w**2``."""
    return np.concatenate(([0.0], c))


def _pad(c, size):
    out = np.zeros(size)
    out[: c.size] = c
    return out


def _poly(c) -> EvenPolynomial:
    return EvenPolynomial(c if c.size else np.zeros(1))


# Canonical functions --------------------------------------------------------

def canon_d(A) -> EvenPolynomial:
    """``| |A + iwI| |**2``; ``d^a = (-1)^(k-a)/(k-a)! B(r^(k-a)(A^2))``."""
    A = _check_square(A)
    if A.shape[0] == 0:
        return EvenPolynomial([1.0])
    return denominator_coeffs(A)


def canon_g(A, B):
    """``(g1, g2)`` with ``2 w conj(|A + iwI|) |B + iwI| = g1 + i g2``.

    ``g1[a]`` multiplies ``w**(2a+1)`` and ``g2[a]`` multiplies ``w**(2a)``.
    """
    A, B = _check_square(A), _check_square(B, "B")
    if A.shape[0] < 1 or B.shape[0] != A.shape[0] - 1:
        raise DimensionError(f"g needs B one smaller than A, got {A.shape} and {B.shape}")
    g1, g2 = _g_parts(_det_coeffs(A), _det_coeffs(B))
    return _poly(g1), _poly(g2)


def canon_h(A, B):
    """``(h1, h2)`` with ``2 conj(|A + iwI|) |B + iwI| = h1 + i h2``.

    ``h1[a]`` multiplies ``w**(2a)`` and ``h2[a]`` multiplies ``w**(2a+1)``.
    """
    A, B = _check_square(A), _check_square(B, "B")
    if A.shape != B.shape:
        raise DimensionError(f"h needs equal shapes, got {A.shape} and {B.shape}")
    h1, h2 = _h_parts(_det_coeffs(A), _det_coeffs(B))
    return _poly(h1), _poly(h2)


def _f_from(dA, dB, a, b):
    _, g2 = _g_parts(a, b)
    return dA + _shift(dB) + g2


def canon_f(A, beta: int) -> EvenPolynomial:
    """``| |A + iwI| - iw |B + iwI| |**2`` with ``B`` = ``A`` minus row/column ``beta``.

    Composed as ``f^a = d^a(A) + d^(a-1)(B) + g2^a(A, B)``.
    """
    A = _check_square(A)
    k = A.shape[0]
    if not 0 <= beta < k:
        raise IndexError(f"beta={beta} out of range for a {k}x{k} matrix")
    B = _delete(A, beta)
    c = _f_from(canon_d(A).coeffs, canon_d(B).coeffs, _det_coeffs(A), _det_coeffs(B))
    return EvenPolynomial(c)


def _s_from(a, b, c):
    h1, h2 = _h_parts(a, b)
    g1, g2 = _g_parts(a, c)
    return h1 + g2, -h2 + g1


def canon_s(A, B, beta: int):
    """``(s1, s2)`` of ``2 |A + iwI| conj(|B + iwI - iw E_beta|)``.

    ``s1 = h1(A, B) + g2(A, C)`` (even powers) and ``s2 = -h2(A, B) + g1(A, C)``
    (odd powers), ``C`` being ``B`` minus row/column ``beta``.
    """
    A, B = _check_square(A), _check_square(B, "B")
    if A.shape != B.shape:
        raise DimensionError(f"s needs equal shapes, got {A.shape} and {B.shape}")
    if not 0 <= beta < B.shape[0]:
        raise IndexError(f"beta={beta} out of range")
    s1, s2 = _s_from(_det_coeffs(A), _det_coeffs(B), _det_coeffs(_delete(B, beta)))
    return _poly(s1), _poly(s2)


def _t_from(a, b, c, d):
    h1, h2 = _h_parts(a, b)
    h1cd, h2cd = _h_parts(c, d)
    g1bc, g2bc = _g_parts(b, c)
    g1ad, g2ad = _g_parts(a, d)
    t1 = h1 + _shift(h1cd) + g2bc + g2ad
    t2 = -h2 - _shift(h2cd)[: h2.size] - g1bc + g1ad
    return t1, t2


def canon_t(A, B, beta1: int, beta2: int):
    """``(t1, t2)`` of ``2 |A + iwI - iw E_b1| conj(|B + iwI - iw E_b2|)``.

    Built from ``h(A, B)``, ``h(C, D)`` shifted by ``w**2``, ``g(B, C)`` and
    ``g(A, D)`` where ``C`` and ``D`` drop row/column ``beta1`` of ``A`` and
    ``beta2`` of ``B``.
    """
    A, B = _check_square(A), _check_square(B, "B")
    if A.shape != B.shape:
        raise DimensionError(f"t needs equal shapes, got {A.shape} and {B.shape}")
    k = A.shape[0]
    if not (0 <= beta1 < k and 0 <= beta2 < k):
        raise IndexError("beta out of range")
    t1, t2 = _t_from(_det_coeffs(A), _det_coeffs(B),
                     _det_coeffs(_delete(A, beta1)), _det_coeffs(_delete(B, beta2)))
    return _poly(t1), _poly(t2)


# Assembly -------------------------------------------------------------------

def _normalise(sys, C=None):
    """Jacobian and per-pair channel weights ``sum_m sigma_m^2 l_om l_pm``."""
    if isinstance(sys, LtiSystem):
        J, L, D = sys.J, sys.L, sys.D
        if C is not None:
            L, D = ldl_reduce(C)
        elif L.shape[1] != L.shape[0]:
            L, D = ldl_reduce(build_covariance(sys))
    else:
        J = _check_square(sys, "J")
        L, D = ldl_reduce(np.eye(J.shape[0]) if C is None else C)
    n = J.shape[0]
    if L.shape != (n, n):
        raise DimensionError(f"L must be {n} x {n} after reduction, got {L.shape}")
    W = np.einsum("m,om,pm->op", D, L, L)
    return J, W


class _Minors:
    """Determinant coefficients of every ``O`` and ``O'`` touching one column."""

    def __init__(self, J, col):
        n = J.shape[0]
        self.sets = [build_O(J, o, col) for o in range(n)]
        self.a = [_det_coeffs(s.O) for s in self.sets]
        self.ap = [None if s.Oprime is None else _det_coeffs(s.Oprime) for s in self.sets]
        self.d = [canon_d(s.O).coeffs for s in self.sets]
        self.dp = [None if s.Oprime is None else canon_d(s.Oprime).coeffs for s in self.sets]


def _auto(W, mi, i, n):
    p = W[i, i] * mi.d[i]
    others = [o for o in range(n) if o != i]
    for j in others:
        p = p + W[j, j] * _f_from(mi.d[j], mi.dp[j], mi.a[j], mi.ap[j])
        s1, _ = _s_from(mi.a[i], mi.a[j], mi.ap[j])
        p = p - W[i, j] * s1
    for x, j in enumerate(others):
        for k in others[:x]:
            if W[j, k] == 0.0:
                continue
            t1, _ = _t_from(mi.a[j], mi.a[k], mi.ap[j], mi.ap[k])
            p = p + W[j, k] * t1
    return ElementCoeffs(EvenPolynomial(p), EvenPolynomial(np.zeros(max(n - 1, 1))), i, i)


def _cross(W, mi, mj, i, j, n):
    h1, h2 = _h_parts(mi.a[i], mj.a[j])
    p = W[i, j] * h1
    pp = -W[i, j] * h2
    for k in range(n):
        if k != j and W[i, k] != 0.0:
            s1, s2 = _s_from(mi.a[i], mj.a[k], mj.ap[k])
            p = p - W[i, k] * s1
            pp = pp - W[i, k] * s2
        if k != i and W[k, j] != 0.0:
            s1, s2 = _s_from(mj.a[j], mi.a[k], mi.ap[k])
            p = p - W[k, j] * s1
            pp = pp + W[k, j] * s2
    for k in range(n):
        if k == i:
            continue
        for q in range(n):
            if q == j or W[k, q] == 0.0:
                continue
            t1, t2 = _t_from(mi.a[k], mj.a[q], mi.ap[k], mj.ap[q])
            p = p + W[k, q] * t1
            pp = pp + W[k, q] * t2
    return ElementCoeffs(EvenPolynomial(0.5 * p), EvenPolynomial(_pad(0.5 * pp, max(n - 1, 1))), i, j)


def _check_index(n, *idx):
    if not all(0 <= k < n for k in idx):
        raise IndexError(f"element {idx} out of range for n={n}")


def auto_coeffs(sys, i: int, C=None) -> ElementCoeffs:
    """Numerator coefficients of the auto-spectrum ``S_ii``.

    ``sys`` is an :class:`LtiSystem` (a non-square ``L`` is first reduced to
    square form through the LDL factorisation of ``L D L^T``) or a bare
    Jacobian together with ``C``.
    """
    J, W = _normalise(sys, C)
    n = J.shape[0]
    _check_index(n, i)
    return _auto(W, _Minors(J, i), i, n)


def cross_coeffs(sys, i: int, j: int, C=None) -> ElementCoeffs:
    """Numerator coefficients ``p`` and ``pp`` of the cross-spectrum ``S_ij``."""
    J, W = _normalise(sys, C)
    n = J.shape[0]
    _check_index(n, i, j)
    if i == j:
        raise ValueError("cross_coeffs needs i != j; use auto_coeffs")
    return _cross(W, _Minors(J, i), _Minors(J, j), i, j, n)


def element_coeffs(sys, i: int, j: int, C=None) -> ElementCoeffs:
    return auto_coeffs(sys, i, C) if i == j else cross_coeffs(sys, i, j, C)


def all_element_coeffs(sys, C=None, pairs=None):
    """``{(i, j): ElementCoeffs}`` for ``pairs`` (default: every entry).

    The minors of each column are expanded once and shared between entries.
    """
    J, W = _normalise(sys, C)
    n = J.shape[0]
    pairs = [(i, j) for i in range(n) for j in range(n)] if pairs is None else list(pairs)
    for i, j in pairs:
        _check_index(n, i, j)
    minors = {}

    def get(c):
        if c not in minors:
            minors[c] = _Minors(J, c)
        return minors[c]

    return {(i, j): _auto(W, get(i), i, n) if i == j else _cross(W, get(i), get(j), i, j, n)
            for i, j in pairs}


def auto_coeffs_general_index(sys: LtiSystem, i: int) -> ElementCoeffs:
    """Auto-spectrum of variable ``i`` by relabelling it as variable 0."""
    order = [i] + [k for k in range(sys.n) if k != i]
    out = auto_coeffs(sys.permuted(order), 0)
    return ElementCoeffs(out.p, out.pp, i, i)


# Low-dimensional closed forms ----------------------------------------------

def _tr(A, k=1):
    return float(np.trace(np.linalg.matrix_power(A, k))) if A.size else 0.0


def closed_form_auto(sys: LtiSystem, equal_noise: bool = False) -> ElementCoeffs:
    """Trace formulas for the auto-spectrum of variable 0 when ``n`` is 2, 3 or 4.

    Requires a diagonal square ``L``.  ``equal_noise`` selects the 3-D
    shortcut that is valid when ``l_k^2 sigma_k^2`` is the same for all k.
    """
    n = sys.n
    if n not in (2, 3, 4):
        raise ValueError(f"closed forms exist for n in (2, 3, 4), got n={n}")
    L = sys.L
    if L.shape != (n, n) or np.any(L - np.diag(np.diag(L))):
        raise ValueError("closed forms need a square diagonal L")
    w = np.diag(L) ** 2 * sys.D
    J = sys.J
    O = [build_O(J, k, 0) for k in range(n)]
    if n == 2:
        # the first coefficient is driven by the variable's own channel
        p = [w[0] * _tr(O[0].O, 2) + w[1] * _tr(O[1].O, 2), w[0]]
    elif n == 3 and equal_noise:
        if not np.allclose(w, w[0], rtol=1e-12, atol=0.0):
            raise ValueError("equal_noise needs identical l_k^2 sigma_k^2")
        A = J[:, 1:]
        A1, A2 = A[:1], A[1:]
        p = [w[0] * np.linalg.det(A.T @ A), w[0] * np.trace(A1.T @ A1 + A2 @ A2), w[0]]
    elif n == 3:
        O11 = O[0].O
        p0 = w[0] * (_tr(O11, 2) ** 2 - _tr(O11, 4))
        p1 = w[0] * _tr(O11, 2)
        for k in (1, 2):
            Ok, Op = O[k].O, O[k].Oprime
            p0 += w[k] * (_tr(Op, 2) ** 2 - _tr(Op, 4) + _tr(Ok, 2) ** 2 - _tr(Ok, 4))
            p1 += w[k] * (-2 * _tr(Op) * _tr(Ok) + _tr(Op, 2) + _tr(Ok) ** 2)
        p = [0.5 * p0, p1, w[0]]
    else:
        O11 = O[0].O
        t2, t4, t6 = _tr(O11, 2), _tr(O11, 4), _tr(O11, 6)
        p0 = w[0] * (t2 ** 3 - 3 * t2 * t4 + 2 * t6)
        p1 = 3 * w[0] * (t2 ** 2 - t4)
        p2 = w[0] * t2
        for k in (1, 2, 3):
            Ok, Op = O[k].O, O[k].Oprime
            a1, a2, a3, a4, a6 = (_tr(Ok, e) for e in (1, 2, 3, 4, 6))
            b1, b2, b4, b6 = (_tr(Op, e) for e in (1, 2, 4, 6))
            p0 += w[k] * (b2 ** 3 - 3 * b2 * b4 + 2 * b6 + a2 ** 3 - 3 * a2 * a4 + 2 * a6)
            p1 += w[k] * (-3 * (b1 ** 2 - b2) * (a1 ** 2 - a2) + 3 * b2 ** 2
                          + 2 * b1 * (a1 ** 3 - 3 * a1 * a2 + 2 * a3)
                          - 3 * b4 + 3 * a2 ** 2 - 3 * a4)
            p2 += w[k] * (b1 ** 2 + a1 ** 2 - 2 * b1 * a1)
        p = [p0 / 6, p1 / 6, p2, w[0]]
    return ElementCoeffs(EvenPolynomial(p), EvenPolynomial(np.zeros(n - 1)), 0, 0)
