from math import comb

import numpy as np
import pytest
from hypothesis import given, settings

from ltispec.poly import DimensionError, denominator_coeffs
from ltispec.recursive import (DegenerateSystemError, SpectralRational, evaluate, residuals,
                               solve_recursive, twin_recursion)
from ltispec.spectral import matrix_oracle
from ltispec.system import LtiSystem, StabilityError
from ltispec.poly import EvenPolynomial

from conftest import C4, J4, S4_FROZEN, random_hurwitz, random_psd, seeds, sizes

# Fitzhugh-Nagumo linearisation at its subthreshold fixed point
VE, WE = -1.0012488298311284212, -0.40166510644150456154
EPS, BETA, SIGMA = 0.08, 0.75, 1e-3
J_FHN = np.array([[1 - VE ** 2, -1.0], [EPS, -BETA * EPS]])
C_FHN = np.diag([0.0, SIGMA ** 2 * WE ** 2])


def test_ou():
    a, c = 2.0, 3.0
    sr = solve_recursive([[-a]], [[c ** 2]])
    assert np.allclose(sr.P[0], c ** 2)
    assert np.allclose(sr.q.coeffs, [a ** 2, 1])
    assert sr.Pp.shape == (0, 1, 1)
    w = np.array([0.0, 0.5, 4.0])
    assert np.allclose(evaluate(sr, w)[:, 0, 0], c ** 2 / (a ** 2 + w ** 2))
    assert evaluate(sr, 0.0)[0, 0] == pytest.approx(c ** 2 / a ** 2)


def test_fhn_closed_form_coefficients():
    sr = solve_recursive(J_FHN, C_FHN)
    P, Pp = sr.element(0, 0)
    assert np.allclose(P, [WE ** 2 * SIGMA ** 2, 0.0], rtol=1e-12, atol=1e-25)
    q0 = (EPS + (VE ** 2 - 1) * BETA * EPS) ** 2
    q1 = (VE ** 2 - 1) ** 2 - 2 * EPS + BETA ** 2 * EPS ** 2
    assert np.allclose(sr.q.coeffs, [q0, q1, 1.0], rtol=1e-12)
    assert evaluate(sr, 0.0)[0, 0].real == pytest.approx(WE ** 2 * SIGMA ** 2 / q0, rel=1e-12)


@pytest.mark.parametrize("n", [1, 2, 3, 5])
def test_negative_identity(n):
    sr = solve_recursive(-np.eye(n), np.eye(n))
    for a in range(n):
        assert np.allclose(sr.P[a], comb(n - 1, a) * np.eye(n))
    assert np.allclose(sr.q.coeffs, [comb(n, a) for a in range(n + 1)])
    w = np.array([0.0, 0.3, 1.0, 2.0, 10.0])
    assert np.allclose(evaluate(sr, w), matrix_oracle(-np.eye(n), w))


def test_frozen_4x4():
    sr = solve_recursive(J4, C4)
    for w, entries in S4_FROZEN:
        S = evaluate(sr, w)
        for (i, j), v in entries.items():
            assert abs(S[i, j] - v) <= 1e-13 * abs(entries[(0, 0)])


def test_lti_system_input_uses_its_covariance():
    L, D = np.tril(np.ones((4, 4))), [1.0, 2.0, 0.5, 1.0]
    sr = solve_recursive(LtiSystem(J4, L, D))
    ref = solve_recursive(J4, (L * D) @ L.T)
    assert np.allclose(sr.P, ref.P)


def test_refuses_unstable_and_marginal():
    with pytest.raises(StabilityError):
        solve_recursive(np.array([[0.5]]))
    with pytest.raises(StabilityError):
        solve_recursive(np.array([[0.0, 1.0], [-1.0, 0.0]]))
    sr = solve_recursive(np.array([[0.0, 1.0], [-1.0, 0.0]]), allow_marginal=True)
    with pytest.raises(DegenerateSystemError):
        evaluate(sr, 1.0)


def test_dimension_errors():
    with pytest.raises(DimensionError):
        solve_recursive(np.ones((2, 3)))
    with pytest.raises(DimensionError):
        solve_recursive(-np.eye(2), np.eye(3))


def test_degenerate_denominator_guard():
    sr = SpectralRational(np.ones((1, 1, 1)), np.zeros((0, 1, 1)), EvenPolynomial([-1.0, 1.0]))
    with pytest.raises(DegenerateSystemError):
        evaluate(sr, 0.0)


class TestResiduals:
    def test_ou_zero(self):
        a, c = 1.5, 0.7
        rep = residuals(solve_recursive([[-a]], [[c ** 2]]), [[-a]], [[c ** 2]])
        assert rep.r1 == 0.0 and rep.r2 == pytest.approx(0.0, abs=1e-15)

    def test_fhn_healthy(self):
        rep = residuals(solve_recursive(J_FHN, C_FHN), J_FHN, C_FHN)
        assert max(rep.rel1, rep.rel2) <= 1e-12
        assert rep.healthy()

    def test_detects_corruption(self, rng):
        J, C = random_hurwitz(rng, 4), random_psd(rng, 4)
        sr = solve_recursive(J, C)
        bad = SpectralRational(sr.P * (1 + 1e-6), sr.Pp, sr.q)
        assert not residuals(bad, J, C).healthy()

    @settings(max_examples=40, deadline=None)
    @given(seed=seeds)
    def test_random_8x8(self, seed):
        rng = np.random.default_rng(seed)
        J, C = random_hurwitz(rng, 8), random_psd(rng, 8)
        assert residuals(solve_recursive(J, C), J, C).healthy(1e-8)


@settings(max_examples=60, deadline=None)
@given(seed=seeds, n=sizes(1, 8))
def test_symmetry_and_antisymmetry(seed, n):
    rng = np.random.default_rng(seed)
    sr = solve_recursive(random_hurwitz(rng, n), random_psd(rng, n))
    for P in sr.P:
        assert np.linalg.norm(P - P.T) <= 1e-10 * np.linalg.norm(P)
    for Pp in sr.Pp:
        assert np.linalg.norm(Pp + Pp.T) <= 1e-10 * max(np.linalg.norm(Pp), 1e-300)
    assert sr.q[n] == 1.0


@settings(max_examples=60, deadline=None)
@given(seed=seeds, n=sizes(1, 8))
def test_matches_oracle(seed, n):
    rng = np.random.default_rng(seed)
    J, C = random_hurwitz(rng, n), random_psd(rng, n)
    w = np.logspace(-2, 2, 21)
    S, ref = evaluate(solve_recursive(J, C), w), matrix_oracle(J, w, C)
    d = np.sqrt(np.abs(np.einsum("kii->ki", ref)))
    assert np.max(np.abs(S - ref) / (d[:, :, None] * d[:, None, :])) <= 1e-8


@settings(max_examples=60, deadline=None)
@given(seed=seeds, n=sizes(1, 8))
def test_twin_problem_and_two_routes_to_q(seed, n):
    J = random_hurwitz(np.random.default_rng(seed), n)
    q, Q, Qp = twin_recursion(J)
    sr = solve_recursive(J, np.eye(n))
    assert np.allclose(sr.P, Q, rtol=0, atol=1e-12 * np.max(np.abs(Q)))
    assert np.allclose(sr.Pp, Qp, rtol=0, atol=1e-12 * max(np.max(np.abs(Qp)) if Qp.size else 0, 1))
    qb = denominator_coeffs(J).coeffs
    assert np.allclose(q.coeffs, qb, rtol=1e-9, atol=1e-9 * np.max(np.abs(qb)))


@settings(max_examples=40, deadline=None)
@given(seed=seeds, n=sizes(1, 4))
def test_log_derivative_of_denominator(seed, n):
    """sum_j 2w/(w^2 + lam_j^2) = Q'(w)/Q(w) for diagonalisable J."""
    J = random_hurwitz(np.random.default_rng(seed), n)
    lam = np.linalg.eigvals(J)
    q = twin_recursion(J)[0].coeffs
    for w in (0.1, 0.9, 3.0):
        Q = np.polyval(q[::-1], w ** 2)
        dQ = sum(2 * a * q[a] * w ** (2 * a - 1) for a in range(1, n + 1))
        lhs = np.sum(2 * w / (w ** 2 + lam ** 2)).real
        assert lhs == pytest.approx(dQ / Q, rel=1e-9)
