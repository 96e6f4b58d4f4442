"""Nonlinear SDE models, their fixed points and linearisations.

Each builder returns a :class:`ModelSpec` holding the drift ``f(x)``, the
state-dependent dispersion ``L(x)`` (so that ``dx = f dt + L dW`` with unit
Wiener increments), an optional analytic Jacobian and a Newton start.
Drift and dispersion accept states of shape ``(..., n)`` so a batch of
realizations can be stepped together.
Time constants are in seconds for the neural rate models.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, Dict, Optional

import numpy as np

from .system import LtiSystem, Stability, hurwitz_check


class ConvergenceError(ArithmeticError):
    """Newton iteration failed to reach the fixed-point tolerance."""


@dataclass(frozen=True, eq=False)
class ModelSpec:
    name: str
    n: int
    params: Dict[str, float]
    drift: Callable[[np.ndarray], np.ndarray]
    dispersion: Callable[[np.ndarray], np.ndarray]
    x0: np.ndarray
    jacobian: Optional[Callable[[np.ndarray], np.ndarray]] = None
    labels: Optional[list] = None
    dt: float = 1e-3
    record_every: int = 1
    # maps the simulated state to the full observable state (RPS conservation)
    expand: Optional[Callable[[np.ndarray], np.ndarray]] = field(default=None)
    # dispersion independent of the state, so noise increments can be drawn in blocks
    additive: bool = False


@dataclass(frozen=True)
class FixedPoint:
    x_star: np.ndarray
    residual: float
    method: str
    iterations: int = 0


def finite_difference_jacobian(f, x, rel_step: float = 1e-6) -> np.ndarray:
    """Central differences with step ``rel_step * max(1, |x_k|)``."""
    x = np.asarray(x, dtype=float)
    n = x.size
    J = np.empty((np.asarray(f(x)).size, n))
    for k in range(n):
        h = rel_step * max(1.0, abs(x[k]))
        e = np.zeros(n)
        e[k] = h
        J[:, k] = (np.asarray(f(x + e)) - np.asarray(f(x - e))) / (2 * h)
    return J


def newton_fixed_point(model: ModelSpec, x0=None, tol: float = 1e-12,
                       max_iter: int = 200) -> FixedPoint:
    """Damped Newton with backtracking on ``||f||``.

    The analytic Jacobian is used when the model provides one.
    """
    x = np.array(model.x0 if x0 is None else x0, dtype=float)
    jac = model.jacobian or (lambda y: finite_difference_jacobian(model.drift, y))
    fx = model.drift(x)
    norm = np.linalg.norm(fx)
    for it in range(1, max_iter + 1):
        if norm <= tol * (1.0 + np.linalg.norm(x)):
            return FixedPoint(x, float(norm), "newton", it - 1)
        try:
            step = np.linalg.solve(jac(x), -fx)
        except np.linalg.LinAlgError as exc:
            raise ConvergenceError(f"{model.name}: singular Jacobian at iteration {it}") from exc
        lam = 1.0
        while lam > 1e-10:
            trial = x + lam * step
            ft = model.drift(trial)
            nt = np.linalg.norm(ft)
            if np.isfinite(nt) and nt < (1.0 - 1e-4 * lam) * norm:
                break
            lam *= 0.5
        else:
            # stalled at round-off level: accept if already tight
            if norm <= 1e-10 * (1.0 + np.linalg.norm(x)):
                return FixedPoint(x, float(norm), "newton", it)
            raise ConvergenceError(f"{model.name}: line search failed at iteration {it}")
        x, fx, norm = trial, ft, nt
    if norm <= 1e-10 * (1.0 + np.linalg.norm(x)):
        return FixedPoint(x, float(norm), "newton", max_iter)
    raise ConvergenceError(f"{model.name}: no convergence in {max_iter} iterations (|f|={norm:.3e})")


def fixed_point(model: ModelSpec, **kw) -> FixedPoint:
    if model.name == "rps":
        x = np.full(model.n, 1.0 / model.params["n"])
        return FixedPoint(x, float(np.linalg.norm(model.drift(x))), "analytic")
    return newton_fixed_point(model, **kw)


def linearize(model: ModelSpec, fp: Optional[FixedPoint] = None) -> LtiSystem:
    """LTI system at the fixed point, dispersion frozen at ``x*``."""
    fp = fixed_point(model) if fp is None else fp
    x = fp.x_star
    if fp.residual > 1e-8 * (1.0 + np.linalg.norm(x)):
        raise ConvergenceError(f"fixed point residual {fp.residual:.3e} too large")
    J = model.jacobian(x) if model.jacobian else finite_difference_jacobian(model.drift, x)
    verdict = hurwitz_check(J)
    if verdict is not Stability.STABLE:
        warnings.warn(f"{model.name}: linearisation is {verdict.value}; spectra will be refused",
                      RuntimeWarning, stacklevel=2)
    L = np.asarray(model.dispersion(x), dtype=float)
    return LtiSystem(J, L, np.ones(L.shape[1]), model.labels)


def _params(defaults, overrides):
    unknown = set(overrides) - set(defaults)
    if unknown:
        raise KeyError(f"unknown parameter(s): {', '.join(sorted(unknown))}")
    out = dict(defaults)
    out.update({k: type(defaults[k])(v) if not isinstance(defaults[k], str) else str(v)
                for k, v in overrides.items()})
    return out


# Models ---------------------------------------------------------------------

def ou_model(**overrides) -> ModelSpec:
    p = _params({"tau": 1.0, "sigma": 1.0}, overrides)
    a = 1.0 / p["tau"]
    return ModelSpec(
        "ou", 1, p,
        drift=lambda x: -a * x,
        dispersion=lambda x: np.array([[p["sigma"]]]),
        x0=np.zeros(1),
        jacobian=lambda x: np.array([[-a]]),
        labels=["x"], dt=1e-2, record_every=1, additive=True,
    )


def fhn_model(**overrides) -> ModelSpec:
    """Fitzhugh-Nagumo with noise ``h2(w) = sigma w`` (or additive on both)."""
    p = _params({"I": 0.265, "alpha": 0.7, "beta": 0.75, "eps": 0.08,
                 "sigma": 1e-3, "noise": "multiplicative"}, overrides)
    I, al, be, ep, sg = p["I"], p["alpha"], p["beta"], p["eps"], p["sigma"]
    if p["noise"] not in ("multiplicative", "additive"):
        raise ValueError("noise must be 'multiplicative' or 'additive'")

    def drift(x):
        v, w = x[..., 0], x[..., 1]
        return np.stack([v - v ** 3 / 3 - w + I, ep * (v + al - be * w)], axis=-1)

    def dispersion(x):
        if p["noise"] == "additive":
            return sg * np.eye(2)
        L = np.zeros(np.shape(x)[:-1] + (2, 2))
        L[..., 1, 1] = sg * x[..., 1]
        return L

    def jacobian(x):
        return np.array([[1 - x[0] ** 2, -1.0], [ep, -be * ep]])

    # start at the real intersection of the cubic and linear nullclines
    roots = np.roots([-1.0 / 3, 0.0, 1 - 1 / be, I - al / be])
    v0 = float(roots[np.argmin(np.abs(roots.imag))].real)
    return ModelSpec("fhn", 2, p, drift, dispersion, np.array([v0, (v0 + al) / be]),
                     jacobian, ["v", "w"], dt=1e-2, record_every=10,
                     additive=p["noise"] == "additive")


def hr_model(**overrides) -> ModelSpec:
    """Hindmarsh-Rose with additive noise on the membrane potential."""
    p = _params({"I": 5.5, "b": 0.5, "mu": 0.01, "x_rest": -1.6, "s": 4.0,
                 "sigma": 1e-3}, overrides)
    I, b, mu, xr, s, sg = (p[k] for k in ("I", "b", "mu", "x_rest", "s", "sigma"))

    def drift(v):
        x, y, z = v[..., 0], v[..., 1], v[..., 2]
        return np.stack([y - x ** 3 + b * x ** 2 + I - z, 1 - 5 * x ** 2 - y,
                         mu * (s * (x - xr) - z)], axis=-1)

    def jacobian(v):
        x = v[0]
        return np.array([[2 * b * x - 3 * x ** 2, 1.0, -1.0], [-10 * x, -1.0, 0.0], [mu * s, 0.0, -mu]])

    x0 = np.array([0.0, 1.0, s * (0.0 - xr)])
    return ModelSpec("hr", 3, p, drift, lambda v: np.diag([sg, 0.0, 0.0]), x0, jacobian,
                     ["x", "y", "z"], dt=1e-2, record_every=10, additive=True)


def _sigmoid(u):
    return 1.0 / (1.0 + np.exp(-u))


def wc4_model(**overrides) -> ModelSpec:
    """Four-variable Wilson-Cowan circuit ``(r_E, r_I, s_E, s_I)``, time in seconds.

    ``noise_time_unit`` is the time unit (in seconds) in which the noise
    terms are unit-intensity white noise.
    """
    p = _params({"tau_E": 0.002, "tau_I": 0.008, "tau_sE": 0.010, "tau_sI": 0.010,
                 "w_EE": 5.0, "w_EI": 5.0, "w_IE": 3.5, "w_II": 3.0,
                 "theta_E": 0.4, "theta_I": 0.4, "kappa_E": 0.2, "kappa_I": 0.02,
                 "gamma_E": 1.0, "gamma_I": 2.0, "I_E": 1.0, "I_I": 0.5,
                 "s0_E": 0.2, "s0_I": 0.05, "sigma_r": 1e-3, "sigma_s": 2e-3,
                 "noise_time_unit": 1e-3}, overrides)
    tau = np.array([p["tau_E"], p["tau_I"], p["tau_sE"], p["tau_sI"]])

    def inputs(x):
        sE, sI = x[..., 2], x[..., 3]
        uE = (p["I_E"] + p["w_EE"] * sE - p["w_EI"] * sI - p["theta_E"]) / p["kappa_E"]
        uI = (p["I_I"] + p["w_IE"] * sE - p["w_II"] * sI - p["theta_I"]) / p["kappa_I"]
        return uE, uI

    def drift(x):
        rE, rI, sE, sI = (x[..., k] for k in range(4))
        uE, uI = inputs(x)
        return np.stack([
            -rE + _sigmoid(uE),
            -rI + _sigmoid(uI),
            -sE + p["gamma_E"] * rE * (1 - sE) + p["s0_E"],
            -sI + p["gamma_I"] * rI * (1 - sI) + p["s0_I"],
        ], axis=-1) / tau

    def jacobian(x):
        rE, rI, sE, sI = x
        uE, uI = inputs(x)
        dE = _sigmoid(uE) * (1 - _sigmoid(uE)) / p["kappa_E"]
        dI = _sigmoid(uI) * (1 - _sigmoid(uI)) / p["kappa_I"]
        J = np.array([
            [-1.0, 0.0, dE * p["w_EE"], -dE * p["w_EI"]],
            [0.0, -1.0, dI * p["w_IE"], -dI * p["w_II"]],
            [p["gamma_E"] * (1 - sE), 0.0, -1 - p["gamma_E"] * rE, 0.0],
            [0.0, p["gamma_I"] * (1 - sI), 0.0, -1 - p["gamma_I"] * rI],
        ])
        return J / tau[:, None]

    # sigma is per unit-intensity white noise in milliseconds, the unit of the time constants
    L = np.diag([p["sigma_r"], p["sigma_r"], p["sigma_s"], p["sigma_s"]]) \
        * np.sqrt(p["noise_time_unit"]) / tau
    return ModelSpec("wc4", 4, p, drift, lambda x: L, np.array([0.5, 0.5, 0.5, 0.5]),
                     jacobian, ["r_E", "r_I", "s_E", "s_I"], dt=2e-5, record_every=10, additive=True)


def ssn_model(**overrides) -> ModelSpec:
    """Stabilised supralinear network on a 1-D grid of ``N`` E and ``N`` I units.

    ``W_EE`` and ``W_IE`` decay as Gaussians in grid distance, ``W_EI`` and
    ``W_II`` are diagonal and the stimulus is ``c exp(-x^2 / (2 sigma_h^2))``.
    Weight magnitudes are placeholders chosen for a stable fixed point with
    damped oscillations.
    """
    p = _params({"N": 11, "c": 50.0, "dx": 3.0, "sigma_h": 6.0, "tau_E": 0.006,
                 "tau_I": 0.004, "k": 0.01, "n_pow": 2.2, "J_EE": 0.5, "J_IE": 0.8,
                 "J_EI": 0.5, "J_II": 0.2, "sigma_EE": 3.0, "sigma_IE": 6.0,
                 "sigma": 0.01}, overrides)
    N = int(p["N"])
    xs = (np.arange(N) - (N - 1) / 2) * p["dx"]
    d2 = (xs[:, None] - xs[None, :]) ** 2
    W_EE = p["J_EE"] * np.exp(-d2 / (2 * p["sigma_EE"] ** 2))
    W_IE = p["J_IE"] * np.exp(-d2 / (2 * p["sigma_IE"] ** 2))
    W_EI = p["J_EI"] * np.eye(N)
    W_II = p["J_II"] * np.eye(N)
    h = p["c"] * np.exp(-xs ** 2 / (2 * p["sigma_h"] ** 2))
    tau = np.concatenate([np.full(N, p["tau_E"]), np.full(N, p["tau_I"])])
    k, npow = p["k"], p["n_pow"]
    W = np.block([[W_EE, -W_EI], [W_IE, -W_II]])
    H = np.concatenate([h, h])

    def drift(x):
        u = np.maximum(H + x @ W.T, 0.0)
        return (-x + k * u ** npow) / tau

    def jacobian(x):
        u = np.maximum(H + W @ x, 0.0)
        gain = k * npow * u ** (npow - 1)
        return (-np.eye(2 * N) + gain[:, None] * W) / tau[:, None]

    L = p["sigma"] * np.diag(1.0 / tau)
    labels = [f"E{i}" for i in range(N)] + [f"I{i}" for i in range(N)]
    return ModelSpec("ssn", 2 * N, p, drift, lambda x: L, np.zeros(2 * N), jacobian,
                     labels, dt=5e-5, record_every=4, additive=True)


def rps_payoff(n: int) -> np.ndarray:
    i = np.arange(1, n + 1)[:, None]
    j = np.arange(1, n + 1)[None, :]
    sign = (-1.0) ** (i + j)
    return np.where(i > j, -sign, np.where(i < j, sign, 0.0))


def rps_model(**overrides) -> ModelSpec:
    """Replicator-mutator game on ``n`` strategies, reduced to ``n - 1`` states.

    The last population is ``1 - sum`` of the others, so conservation holds
    exactly for every simulated state.
    """
    p = _params({"n": 31, "mu": 5e-4, "sigma": 1e-4}, overrides)
    n = int(p["n"])
    if n < 3 or n % 2 == 0:
        raise ValueError(f"rps needs an odd number of strategies >= 3, got {n}")
    mu, sg = p["mu"], p["sigma"]
    P = rps_payoff(n)

    def expand(y):
        y = np.asarray(y, dtype=float)
        return np.concatenate([y, 1.0 - np.sum(y, axis=-1, keepdims=True)], axis=-1)

    def drift(y):
        x = expand(y)
        f = x @ P.T
        phi = np.sum(x * f, axis=-1, keepdims=True)
        mut = mu * (-(n - 1) * x + (np.sum(x, axis=-1, keepdims=True) - x))
        return (x * (f - phi) + mut)[..., : n - 1]

    def jacobian(y):
        m = n - 1
        i = np.arange(1, m + 1)[:, None]
        j = np.arange(1, m + 1)[None, :]
        base = (-1.0) ** i * 2.0 / n
        J = np.where(i > j, np.where(j % 2 == 1, base, 0.0),
                     np.where(i < j, np.where(j % 2 == 0, base, 0.0), 0.0))
        J = J + np.diag((-1.0) ** np.arange(1, m + 1) / n - mu * n)
        return J

    return ModelSpec("rps", n - 1, p, drift, lambda y: sg * y[..., :, None] * np.eye(n - 1),
                     np.full(n - 1, 1.0 / n), jacobian,
                     [f"x{i + 1}" for i in range(n - 1)], dt=1e-2, record_every=10,
                     expand=expand)


MODELS = {
    "ou": ou_model,
    "fhn": fhn_model,
    "hr": hr_model,
    "wc4": wc4_model,
    "ssn": ssn_model,
    "rps": rps_model,
}


def get_model(name: str, **params) -> ModelSpec:
    try:
        builder = MODELS[name]
    except KeyError:
        raise KeyError(f"unknown model {name!r}; choose from {', '.join(MODELS)}") from None
    return builder(**params)
