"""Leverrier-Faddeev-type recursion for the rational PSD matrix.

The spectral density ``S(w) = (iwI + J)^-1 C (-iwI + J)^-T`` is returned as

    S(w) = (sum_a P_a w^(2a) + i w sum_a P'_a w^(2a)) / sum_a q_a w^(2a)

with symmetric ``P_a`` (a = 0..n-1), antisymmetric ``P'_a`` (a = 0..n-2)
and scalar ``q_a`` (a = 0..n, ``q_n = 1``).  Everything is built from
matrix products and traces, O(n^4) in total.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .poly import DimensionError, EvenPolynomial, eval_even
from .system import LtiSystem, build_covariance, require_hurwitz


class DegenerateSystemError(ArithmeticError):
    """Raised when the denominator vanishes on the real frequency axis."""


@dataclass(frozen=True, eq=False)
class SpectralRational:
    P: np.ndarray  # (n, n, n), P[a] is the coefficient of w^(2a)
    Pp: np.ndarray  # (max(n-1, 0), n, n), coefficient of i w^(2a+1)
    q: EvenPolynomial

    @property
    def n(self) -> int:
        return self.P.shape[1]

    def element(self, i: int, j: int):
        """Numerator coefficients of entry ``(i, j)`` (zero-based)."""
        return self.P[:, i, j].copy(), self.Pp[:, i, j].copy()

    def __call__(self, w):
        return evaluate(self, w)


@dataclass(frozen=True)
class ResidualReport:
    """Redundant terminal identities of the recursion.

    ``r1 = ||J P_0 - P_0 J^T - J P'_0 J^T||_F`` and ``r2 = ||q_0 C - J P_0 J^T||_F``.
    Each is made relative to the summed norms of the terms that cancel in
    it (``scale1``, ``scale2``), which keeps the ratio independent of the
    units of ``J``.  ``scale`` is the cruder ``||C||_F ||J||_F^2`` reference.
    """

    r1: float
    r2: float
    scale: float
    scale1: float
    scale2: float

    @property
    def rel1(self) -> float:
        return self.r1 / self.scale1 if self.scale1 else self.r1

    @property
    def rel2(self) -> float:
        return self.r2 / self.scale2 if self.scale2 else self.r2

    def healthy(self, tol: float = 1e-8) -> bool:
        return max(self.rel1, self.rel2) <= tol


def _downward(J, C, q):
    """Run the numerator recursion from ``P_n = P'_n = 0`` down to ``P_0``.

    Returns ``(P, Pp)`` stacked by power.  ``q`` must hold q_1..q_n at least.
    """
    n = J.shape[0]
    P = np.zeros((n, n, n))
    Pp = np.zeros((max(n - 1, 0), n, n))
    Pa = np.zeros((n, n))
    Ppa = np.zeros((n, n))
    JT = J.T
    for a in range(n, 0, -1):
        Pp_next = J @ Pa - Pa @ JT - J @ Ppa @ JT
        P_next = q[a] * C + Pp_next @ JT - J @ Pp_next - J @ Pa @ JT
        P[a - 1] = P_next
        if a <= n - 1:
            Pp[a - 1] = Pp_next
        Pa, Ppa = P_next, Pp_next
    return P, Pp


def twin_recursion(J):
    """Denominator and numerator stacks of the twin problem ``C = I``.

    ``q_a = [Tr(J Q'_{a-1}) + Tr(J Q_a J^T)] / (n - a)``, interleaved with the
    ``Q`` recursion because ``Q_{a-1}`` consumes ``q_a``.

    Returns
    -------
    q : EvenPolynomial
    Q : (n, n, n) ndarray
    Qp : (n-1, n, n) ndarray
    """
    J = np.asarray(J, dtype=float)
    n = J.shape[0]
    JT = J.T
    eye = np.eye(n)
    q = np.zeros(n + 1)
    q[n] = 1.0
    Q = np.zeros((n, n, n))
    Qp = np.zeros((max(n - 1, 0), n, n))
    Qa = np.zeros((n, n))
    Qp_cur = np.zeros((n, n))  # Q'_{n-1} = 0
    for a in range(n, 0, -1):
        Q_prev = q[a] * eye + Qp_cur @ JT - J @ Qp_cur - J @ Qa @ JT
        Qp_prev = J @ Q_prev - Q_prev @ JT - J @ Qp_cur @ JT
        q[a - 1] = (np.trace(J @ Qp_prev) + np.trace(J @ Q_prev @ JT)) / (n - a + 1)
        Q[a - 1] = Q_prev
        if a >= 2:
            Qp[a - 2] = Qp_prev
        Qa, Qp_cur = Q_prev, Qp_prev
    return EvenPolynomial(q), Q, Qp


def twin_denominator(J) -> EvenPolynomial:
    return twin_recursion(J)[0]


def solve_recursive(J, C=None, *, check_stability: bool = True,
                    allow_marginal: bool = False) -> SpectralRational:
    """Coefficients of the rational PSD matrix of ``dx = J x dt + noise(C)``.

    Parameters
    ----------
    J : (n, n) array_like or LtiSystem
        Hurwitz Jacobian.  If an :class:`LtiSystem` is given, ``C`` defaults
        to its ``L D L^T``.
    C : (n, n) array_like, optional
        Noise covariance.
    """
    if isinstance(J, LtiSystem):
        C = build_covariance(J) if C is None else C
        J = J.J
    J = np.asarray(J, dtype=float)
    if J.ndim != 2 or J.shape[0] != J.shape[1]:
        raise DimensionError(f"J must be square, got shape {J.shape}")
    n = J.shape[0]
    C = np.eye(n) if C is None else np.asarray(C, dtype=float)
    if C.shape != (n, n):
        raise DimensionError(f"C must be {n} x {n}, got shape {C.shape}")
    if check_stability:
        require_hurwitz(J, allow_marginal=allow_marginal)
    q = twin_denominator(J)
    P, Pp = _downward(J, C, q.coeffs)
    return SpectralRational(P, Pp, q)


def residuals(sr: SpectralRational, J, C) -> ResidualReport:
    J = np.asarray(J, dtype=float)
    C = np.asarray(C, dtype=float)
    P0 = sr.P[0]
    Pp0 = sr.Pp[0] if sr.Pp.shape[0] else np.zeros_like(P0)
    a, b, c = J @ P0, P0 @ J.T, J @ Pp0 @ J.T
    d, e = sr.q[0] * C, J @ P0 @ J.T
    norm = np.linalg.norm
    return ResidualReport(
        float(norm(a - b - c)), float(norm(d - e)),
        float(norm(C) * norm(J) ** 2),
        float(norm(a) + norm(b) + norm(c)), float(norm(d) + norm(e)),
    )


def _matrix_poly(stack, w2):
    acc = np.zeros(stack.shape[1:] + w2.shape)
    for coeff in stack[::-1]:
        acc = acc * w2 + coeff[..., None]
    return acc


def evaluate(sr: SpectralRational, w):
    """``S(w)`` as an ``(n, n)`` complex matrix, or ``(len(w), n, n)`` for arrays."""
    w_arr = np.atleast_1d(np.asarray(w, dtype=float))
    w2 = w_arr ** 2
    Q = eval_even(sr.q, w_arr)
    if np.any(Q <= 0):
        raise DegenerateSystemError(
            "Q(w) <= 0 on the real axis (marginal J, or denominator coefficients lost to round-off)")
    num = _matrix_poly(sr.P, w2)
    if sr.Pp.shape[0]:
        num = num + 1j * w_arr * _matrix_poly(sr.Pp, w2)
    S = np.moveaxis(num / Q, -1, 0)
    return S[0] if np.ndim(w) == 0 else S
