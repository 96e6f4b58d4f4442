"""Linear time-invariant SDE definition ``dx = J x dt + L dW`` with ``E[dW dW^T] = D dt``."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence

import numpy as np
from scipy import linalg

from .poly import DimensionError


class StabilityError(ValueError):
    """Raised when a computation needs a Hurwitz Jacobian and did not get one."""


class CovarianceError(ValueError):
    """Raised for an indefinite or non-symmetric noise covariance."""


class Stability(str, Enum):
    STABLE = "stable"
    UNSTABLE = "unstable"
    MARGINAL = "marginal"


@dataclass(frozen=True, eq=False)
class LtiSystem:
    """Jacobian ``J`` (n x n), dispersion ``L`` (n x m), diagonal diffusion ``D`` (m x m).

    ``D`` may be given as a length-m vector of the diagonal entries.
    """

    J: np.ndarray
    L: Optional[np.ndarray] = None
    D: Optional[np.ndarray] = None
    labels: Optional[Sequence[str]] = field(default=None)

    def __post_init__(self):
        J = np.atleast_2d(np.asarray(self.J, dtype=float))
        if J.ndim != 2 or J.shape[0] != J.shape[1]:
            raise DimensionError(f"J must be square, got shape {J.shape}")
        n = J.shape[0]
        L = np.eye(n) if self.L is None else np.asarray(self.L, dtype=float)
        if L.ndim == 1:
            L = L.reshape(n, -1)
        if L.ndim != 2 or L.shape[0] != n:
            raise DimensionError(f"L must have {n} rows, got shape {L.shape}")
        m = L.shape[1]
        D = np.ones(m) if self.D is None else np.asarray(self.D, dtype=float)
        if D.ndim == 2:
            if D.shape != (m, m):
                raise DimensionError(f"D must be {m} x {m}, got shape {D.shape}")
            if np.any(D - np.diag(np.diag(D))):
                raise DimensionError("D must be diagonal; pass C through ldl_reduce instead")
            D = np.diag(D).copy()
        D = np.atleast_1d(D)
        if D.shape != (m,):
            raise DimensionError(f"D must have {m} diagonal entries, got {D.shape}")
        if np.any(D < 0):
            raise CovarianceError("diffusion entries must be non-negative")
        if self.labels is not None and len(self.labels) != n:
            raise DimensionError(f"expected {n} labels, got {len(self.labels)}")
        for name, arr in (("J", J), ("L", L), ("D", D)):
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} contains non-finite entries")
            arr.setflags(write=False)
        object.__setattr__(self, "J", J)
        object.__setattr__(self, "L", L)
        object.__setattr__(self, "D", D)

    @property
    def n(self) -> int:
        return self.J.shape[0]

    @property
    def m(self) -> int:
        return self.L.shape[1]

    @property
    def Dmat(self) -> np.ndarray:
        return np.diag(self.D)

    def covariance(self) -> np.ndarray:
        return build_covariance(self)

    def permuted(self, order) -> "LtiSystem":
        """Relabel the state variables: new variable ``k`` is old ``order[k]``."""
        order = np.asarray(order)
        labels = None if self.labels is None else [self.labels[k] for k in order]
        return LtiSystem(self.J[np.ix_(order, order)], self.L[order], self.D, labels)


def build_covariance(sys: LtiSystem) -> np.ndarray:
    """Noise covariance ``C = L D L^T``, symmetrised."""
    C = (sys.L * sys.D) @ sys.L.T
    return 0.5 * (C + C.T)


def ldl_reduce(C, tol: float = 1e-12):
    """LDL^T factorisation of a symmetric positive semidefinite matrix.

    Returns ``(L, d)`` with ``L`` unit lower triangular and ``d`` the diagonal
    of ``D``.  Pivots below ``tol * ||C||`` are clamped to zero and the column
    is skipped; the remaining entries of that column must then vanish too.

    Raises
    ------
    CovarianceError
        If ``C`` is not symmetric or is indefinite beyond the tolerance.
    """
    C = np.asarray(C, dtype=float)
    if C.ndim != 2 or C.shape[0] != C.shape[1]:
        raise DimensionError(f"C must be square, got shape {C.shape}")
    n = C.shape[0]
    scale = np.linalg.norm(C) or 1.0
    if np.linalg.norm(C - C.T) > tol * scale:
        raise CovarianceError("covariance is not symmetric")
    thresh = tol * scale
    A = 0.5 * (C + C.T)
    L = np.eye(n)
    d = np.zeros(n)
    for k in range(n):
        pivot = A[k, k] - np.dot(L[k, :k] ** 2, d[:k])
        col = A[k + 1:, k] - L[k + 1:, :k] @ (L[k, :k] * d[:k])
        if pivot < -thresh:
            raise CovarianceError(f"negative pivot {pivot:.3e} at index {k}: C is indefinite")
        if pivot <= thresh:
            if np.any(np.abs(col) > thresh):
                raise CovarianceError(f"zero pivot at index {k} with non-zero column: C is indefinite")
            d[k] = 0.0
            continue
        d[k] = pivot
        L[k + 1:, k] = col / pivot
    return L, d


def faddeev_leverrier(J) -> np.ndarray:
    """Monic characteristic polynomial coefficients of ``det(sI - J)``.

    Returned highest power first, ``[1, c_1, ..., c_n]``.  Classical
    trace-and-subtract recursion ``M_k = J M_{k-1} + c_{k-1} I``,
    ``c_k = -Tr(J M_k) / k``.
    """
    J = np.asarray(J, dtype=float)
    if J.ndim != 2 or J.shape[0] != J.shape[1]:
        raise DimensionError(f"J must be square, got shape {J.shape}")
    n = J.shape[0]
    c = np.zeros(n + 1)
    c[0] = 1.0
    M = np.zeros((n, n))
    eye = np.eye(n)
    for k in range(1, n + 1):
        M = J @ M + c[k - 1] * eye
        c[k] = -np.trace(J @ M) / k
    return c


def routh_table(coeffs):
    """First-column pivots of the Routh table and the scale of each row.

    ``coeffs`` is highest power first.  Stops early at a zero pivot.
    """
    a = np.asarray(coeffs, dtype=float)
    n = a.size - 1
    width = n // 2 + 1
    prev = np.zeros(width + 1)
    cur = np.zeros(width + 1)
    prev[: a[0::2].size] = a[0::2]
    cur[: a[1::2].size] = a[1::2]
    pivots = [prev[0]]
    scales = [np.max(np.abs(prev))]
    for _ in range(n):
        scale = max(np.max(np.abs(cur)), scales[-1])
        pivots.append(cur[0])
        scales.append(scale)
        if cur[0] == 0.0:
            break
        new = np.zeros(width + 1)
        new[:-1] = (cur[0] * prev[1:] - prev[0] * cur[1:]) / cur[0]
        prev, cur = cur, new
    return np.array(pivots), np.array(scales)


def lyapunov_solve(J, C) -> np.ndarray:
    """Solve ``J S + S J^T + C = 0`` (Bartels-Stewart).

    Raises ``LinAlgError`` when ``J`` has an eigenvalue pair summing to zero.
    """
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        S = linalg.solve_continuous_lyapunov(np.asarray(J, dtype=float), -np.asarray(C, dtype=float))
    # scipy warns and perturbs the problem when it is singular
    if caught:
        raise np.linalg.LinAlgError(str(caught[0].message))
    return 0.5 * (S + S.T)


def _routh_verdict(J, rtol) -> Stability:
    c = faddeev_leverrier(J)
    n = c.size - 1
    # s -> rho*s keeps the coefficients O(1) without changing pivot signs
    rho = np.max(np.abs(c[1:]) ** (1.0 / np.arange(1, n + 1)))
    if rho == 0.0:
        return Stability.MARGINAL
    a = c / rho ** np.arange(n + 1)
    pivots, scales = routh_table(a)
    if pivots.size < n + 1 or np.any(np.abs(pivots) <= rtol * scales):
        return Stability.MARGINAL
    return Stability.STABLE if np.all(pivots > 0) else Stability.UNSTABLE


def _lyapunov_verdict(J, rtol) -> Stability:
    n = J.shape[0]
    try:
        S = lyapunov_solve(J, np.eye(n))
    except np.linalg.LinAlgError:
        return Stability.MARGINAL
    # ||S|| ~ 1/(2 * distance of the spectrum from the imaginary axis)
    if not np.all(np.isfinite(S)) or np.linalg.norm(S) * np.linalg.norm(J) * rtol > 1.0:
        return Stability.MARGINAL
    try:
        np.linalg.cholesky(S)
    except np.linalg.LinAlgError:
        return Stability.UNSTABLE
    return Stability.STABLE


ROUTH_MAX_DIM = 10


def hurwitz_check(J, rtol: float = 1e-10, method: str = "auto") -> Stability:
    """Classify ``J`` as stable, unstable or marginal without an eigensolver.

    ``method="routh"`` applies the Routh table to the Faddeev-Leverrier
    characteristic polynomial; a pivot below ``rtol`` times its row scale is
    marginal.  ``method="lyapunov"`` solves ``J S + S J^T = -I`` and tests
    ``S`` for positive definiteness (inertia theorem).  ``"auto"`` uses Routh
    up to ``ROUTH_MAX_DIM`` and the Lyapunov test above it, where the
    characteristic polynomial coefficients are no longer reliable in double
    precision.
    """
    J = np.asarray(J, dtype=float)
    if J.ndim != 2 or J.shape[0] != J.shape[1]:
        raise DimensionError(f"J must be square, got shape {J.shape}")
    if J.shape[0] == 0:
        return Stability.STABLE
    if method == "auto":
        method = "routh" if J.shape[0] <= ROUTH_MAX_DIM else "lyapunov"
    if method == "routh":
        return _routh_verdict(J, rtol)
    if method == "lyapunov":
        return _lyapunov_verdict(J, rtol)
    raise ValueError(f"unknown method {method!r}")


def require_hurwitz(J, allow_marginal: bool = False) -> Stability:
    verdict = hurwitz_check(J)
    if verdict is Stability.UNSTABLE or (verdict is Stability.MARGINAL and not allow_marginal):
        raise StabilityError(f"Jacobian is {verdict.value}, spectrum is undefined")
    return verdict
