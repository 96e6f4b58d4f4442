"""Reference PSD oracle, coherence and the Lyapunov covariance identity."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .poly import DimensionError, denominator_coeffs, eval_even
from .recursive import DegenerateSystemError, SpectralRational, evaluate
from .system import LtiSystem, StabilityError, build_covariance, lyapunov_solve


class ResonanceError(DegenerateSystemError):
    """The shifted matrix ``iwI + J`` is singular at the requested frequency."""


class QuadratureError(ArithmeticError):
    """Adaptive quadrature did not reach the requested tolerance."""

    def __init__(self, message, estimate, error):
        super().__init__(message)
        self.estimate = estimate
        self.error = error


@dataclass(frozen=True, eq=False)
class SpectrumMatrix:
    w: float
    S: np.ndarray

    def hermitian_defect(self) -> float:
        scale = np.linalg.norm(self.S) or 1.0
        return float(np.linalg.norm(self.S - self.S.conj().T) / scale)


def _unpack(sys, C=None):
    if isinstance(sys, LtiSystem):
        return sys.J, build_covariance(sys) if C is None else np.asarray(C, float)
    J = np.asarray(sys, dtype=float)
    if J.ndim != 2 or J.shape[0] != J.shape[1]:
        raise DimensionError(f"J must be square, got shape {J.shape}")
    return J, np.eye(J.shape[0]) if C is None else np.asarray(C, dtype=float)


def _oracle_matrix(J, C, w):
    n = J.shape[0]
    shift = 1j * w * np.eye(n)
    A = shift + J
    # conditioning guard: a singular shifted matrix means a pole on the real axis
    if np.linalg.cond(A) > 1e15:
        raise ResonanceError(f"iwI + J is singular at w={w:g}")
    X = np.linalg.solve(A, C.astype(complex))
    return np.linalg.solve(J - shift, X.T).T


def matrix_oracle(sys, w, C=None):
    """``S(w) = (iwI + J)^-1 C (-iwI + J)^-T`` by two dense solves.

    Returns a :class:`SpectrumMatrix` for scalar ``w`` and an array of shape
    ``(len(w), n, n)`` for an array of frequencies.
    """
    J, C = _unpack(sys, C)
    if np.ndim(w) == 0:
        return SpectrumMatrix(float(w), _oracle_matrix(J, C, float(w)))
    return np.stack([_oracle_matrix(J, C, float(x)) for x in np.asarray(w, float)])


def coherence(S, i: int, j: int, slack: float = 1e-12) -> float:
    """``|S_ij|^2 / (|S_ii| |S_jj|)``; values beyond ``[0, 1]`` by more than ``slack`` raise."""
    S = S.S if isinstance(S, SpectrumMatrix) else np.asarray(S)
    sii, sjj = abs(S[i, i]), abs(S[j, j])
    if sii == 0.0 or sjj == 0.0:
        raise ZeroDivisionError(f"coherence undefined: zero auto-spectrum at ({i}, {j})")
    k = abs(S[i, j]) ** 2 / (sii * sjj)
    if k > 1.0 + slack or k < -slack:
        raise ArithmeticError(f"coherence {k!r} outside [0, 1]")
    return float(min(max(k, 0.0), 1.0))


def coherence_grid(S, i: int, j: int) -> np.ndarray:
    """Coherence over a stack ``(len(w), n, n)``."""
    return np.array([coherence(s, i, j, slack=1e-9) for s in S])


def stationary_covariance(J, C=None) -> np.ndarray:
    """Solve ``J Sigma + Sigma J^T + C = 0``."""
    J, C = _unpack(J, C)
    try:
        S = lyapunov_solve(J, C)
    except np.linalg.LinAlgError as exc:
        raise StabilityError("Lyapunov system is singular; J is marginal") from exc
    if not np.all(np.isfinite(S)):
        raise StabilityError("Lyapunov system is singular; J is marginal")
    return S


def spectral_radius_bound(J) -> float:
    """Gershgorin bound on the eigenvalue magnitudes of ``J``."""
    J = np.asarray(J, dtype=float)
    return float(np.max(np.sum(np.abs(J), axis=1))) if J.size else 0.0


def default_grid(J, count: int = 100) -> np.ndarray:
    """Log-spaced angular frequencies from ``1e-3 rho`` to ``1e2 rho``."""
    rho = spectral_radius_bound(J) or 1.0
    return np.logspace(np.log10(rho) - 3, np.log10(rho) + 2, count)


@dataclass(frozen=True)
class QuadratureConfig:
    """Composite Gauss-Legendre on log-spaced panels with adaptive bisection.

    The panels cover ``[0, Omega]`` with ``Omega = omega_factor * max(1, rho)``;
    everything above ``Omega`` is added from the large-``w`` expansion.
    """

    order: int = 16
    panels_per_decade: int = 4
    decades_below: float = 8.0
    omega_factor: float = 1e3
    rtol: float = 1e-10
    max_depth: int = 30


def _gl_panel(f, a, b, x, wts):
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    return half * np.einsum("k,kij->ij", wts, f(mid + half * x))


def integrate_psd(sr: SpectralRational, J=None, config: QuadratureConfig = QuadratureConfig()):
    """``(1/2pi) * integral of S(w) over the real line``, real part.

    ``J`` only sets the frequency scale; without it the scale comes from the
    denominator coefficients.  Returns ``(Sigma, error_estimate)``.
    """
    n = sr.n
    if J is not None:
        rho = spectral_radius_bound(J)
    else:
        q = np.asarray(sr.q.coeffs)
        rho = float(np.max(np.abs(q[:-1]) ** (1.0 / (2 * (n - np.arange(n)))))) if n else 1.0
    rho = max(rho, 1e-300)
    omega = config.omega_factor * max(1.0, rho)
    lo = rho * 10.0 ** (-config.decades_below)
    n_pan = int(np.ceil(np.log10(omega / lo) * config.panels_per_decade))
    edges = np.concatenate(([0.0], np.geomspace(lo, omega, n_pan + 1)))
    x, wts = np.polynomial.legendre.leggauss(config.order)

    def f(w):
        return evaluate(sr, w).real

    total = np.zeros((n, n))
    err = 0.0
    stack = [(a, b, 0, _gl_panel(f, a, b, x, wts)) for a, b in zip(edges[:-1], edges[1:])]
    while stack:
        a, b, depth, coarse = stack.pop()
        m = 0.5 * (a + b)
        left, right = _gl_panel(f, a, m, x, wts), _gl_panel(f, m, b, x, wts)
        fine = left + right
        delta = np.max(np.abs(fine - coarse))
        if delta <= config.rtol * max(np.max(np.abs(fine)), 1e-300) or depth >= config.max_depth:
            if depth >= config.max_depth:
                err += delta
            total += fine
            continue
        stack.append((a, m, depth + 1, left))
        stack.append((m, b, depth + 1, right))
    # tail: S ~ P_{n-1}/w^2 + (P_{n-2} - q_{n-1} P_{n-1})/w^4; odd terms are imaginary
    tail = sr.P[n - 1] / omega
    if n >= 2:
        tail = tail + (sr.P[n - 2] - sr.q[n - 1] * sr.P[n - 1]) / (3 * omega ** 3)
    Sigma = (total + tail) / np.pi
    scale = np.max(np.abs(Sigma)) or 1.0
    if err > 1e-6 * scale:
        raise QuadratureError("PSD quadrature did not converge", Sigma, err / np.pi)
    return 0.5 * (Sigma + Sigma.T), err / np.pi


def element_spectrum(ec, q, w) -> np.ndarray:
    """Evaluate ``(p(w) + i w pp(w)) / Q(w)`` for element coefficients ``ec``."""
    w = np.asarray(w, dtype=float)
    Q = eval_even(q, w)
    if np.any(np.asarray(Q) <= 0):
        raise DegenerateSystemError("Q(w) <= 0 on the real axis")
    return (eval_even(ec.p, w) + 1j * w * eval_even(ec.pp, w)) / Q


def spectrum_pairs(sys, w, pairs, method: str = "recursive", C=None, allow_marginal=False):
    """Spectrum entries ``{(i, j): values over w}`` by one of the analytic methods.

    ``method`` is ``recursive``, ``elementwise`` or ``oracle``.
    """
    from .elementwise import all_element_coeffs
    from .recursive import solve_recursive
    from .system import require_hurwitz

    J, Cm = _unpack(sys, C)
    w = np.atleast_1d(np.asarray(w, dtype=float))
    if method == "recursive":
        sr = solve_recursive(J, Cm, allow_marginal=allow_marginal)
        S = evaluate(sr, w)
        return {(i, j): S[:, i, j] for i, j in pairs}
    if method == "elementwise":
        require_hurwitz(J, allow_marginal=allow_marginal)
        q = denominator_coeffs(J)
        coeffs = all_element_coeffs(J, Cm, pairs)
        return {key: element_spectrum(ec, q, w) for key, ec in coeffs.items()}
    if method == "oracle":
        require_hurwitz(J, allow_marginal=allow_marginal)
        S = matrix_oracle(J, w, Cm)
        return {(i, j): S[:, i, j] for i, j in pairs}
    raise ValueError(f"unknown method {method!r}")
