"""Euler-Maruyama simulation and Welch spectral estimation.

Spectral convention: estimates are two-sided densities in angular frequency,
``S(w)`` with ``w = 2 pi f``, normalised so that ``(1/2pi) * integral S dw``
is the variance.  The cross entry ``(i, j)`` estimates ``E[conj(X_i) X_j]``,
the same orientation as ``(iwI + J)^-1 C (-iwI + J)^-T``.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable, Dict, Optional, Sequence, Tuple

import numpy as np
from scipy import signal

RNG_ALGORITHM = "Philox"


class BlowUpError(FloatingPointError):
    """The simulated state became non-finite."""

    def __init__(self, step: int):
        super().__init__(f"non-finite state at step {step}")
        self.step = step


class TooShortError(ValueError):
    """Trajectory too short for the requested Welch configuration."""


@dataclass(frozen=True)
class SimConfig:
    """Fixed-step integration settings.

    ``realizations`` independent paths are stepped together; path ``r`` draws
    from ``Philox(SeedSequence(seed).spawn(realizations)[r])``, so each path
    is fixed by ``(seed, r)`` alone.
    """

    dt: float
    t_total: float
    burn_in: float = 0.0
    seed: int = 0
    x0: Optional[Sequence[float]] = None
    record_every: int = 1
    realizations: int = 1

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not 0 <= self.burn_in < self.t_total:
            raise ValueError("burn_in must lie in [0, t_total)")
        if self.record_every < 1 or self.realizations < 1:
            raise ValueError("record_every and realizations must be >= 1")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise ValueError("seed must be a 64-bit unsigned integer")


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Recorded states ``x`` of shape ``(realizations, samples, n)`` at spacing ``dt``."""

    x: np.ndarray
    dt: float
    seed: int
    model: str = "custom"
    metadata: Dict[str, str] = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.x.shape[-1]

    @property
    def fs(self) -> float:
        return 1.0 / self.dt


def _generators(seed: int, count: int):
    return [np.random.Generator(np.random.Philox(s))
            for s in np.random.SeedSequence(int(seed)).spawn(count)]


def simulate(drift: Callable, dispersion: Callable, cfg: SimConfig, x0=None,
             expand: Optional[Callable] = None, model: str = "custom",
             additive: bool = False) -> Trajectory:
    """Integrate ``dx = f(x) dt + L(x) dW`` by Euler-Maruyama.

    ``drift`` and ``dispersion`` must accept states of shape ``(R, n)``.
    Only every ``record_every``-th state after the burn-in is kept; ``expand``
    maps recorded states to observables (used for conserved quantities).
    With ``additive`` the dispersion is evaluated once and the noise
    increments are formed a block at a time; the draws are the same.
    """
    x0 = cfg.x0 if x0 is None else x0
    if x0 is None:
        raise ValueError("an initial state is required")
    R = cfg.realizations
    x = np.tile(np.asarray(x0, dtype=float), (R, 1))
    L0 = np.asarray(dispersion(x))
    m = L0.shape[-1]
    steps = int(round(cfg.t_total / cfg.dt))
    burn = int(round(cfg.burn_in / cfg.dt))
    keep = (steps - burn) // cfg.record_every
    gens = _generators(cfg.seed, R)
    sq = np.sqrt(cfg.dt)
    out = np.empty((R, keep, x.shape[1]))
    block = 4096
    xi = np.empty((R, block, m))
    inc = None
    rec = 0
    # overflow on the way to a blow-up is reported as BlowUpError instead
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(steps):
            b = k % block
            if b == 0:
                for r, g in enumerate(gens):
                    xi[r] = g.standard_normal((block, m))
                if additive:
                    inc = np.matmul(xi, np.swapaxes(L0, -1, -2) * sq)
            if additive:
                x = x + drift(x) * cfg.dt + inc[:, b]
            else:
                x = x + drift(x) * cfg.dt + np.matmul(dispersion(x), xi[:, b, :, None])[..., 0] * sq
            if not np.isfinite(x.sum()):
                raise BlowUpError(k + 1)
            j = k + 1 - burn
            if j > 0 and j % cfg.record_every == 0 and rec < keep:
                out[:, rec] = x
                rec += 1
    if expand is not None:
        out = expand(out)
    meta = {"rng": RNG_ALGORITHM, "numpy": np.__version__, "seeding": "SeedSequence.spawn",
            "integrator": "euler-maruyama", "step_dt": repr(cfg.dt)}
    return Trajectory(out, cfg.dt * cfg.record_every, int(cfg.seed), model, meta)


def simulate_model(model, cfg: SimConfig, x0=None) -> Trajectory:
    """Simulate a :class:`~ltispec.models.ModelSpec` starting from its fixed point by default."""
    if x0 is None and cfg.x0 is None:
        from .models import fixed_point
        x0 = fixed_point(model).x_star
    return simulate(model.drift, model.dispersion, cfg, x0, model.expand, model.name,
                    additive=model.additive)


def save_trajectory_csv(traj: Trajectory, path, realization: int = 0) -> None:
    """One realization as CSV with ``#`` metadata lines (dt, seed, model)."""
    with open(path, "w", newline="") as fh:
        fh.write(f"# model={traj.model}\n# dt={traj.dt!r}\n# seed={traj.seed}\n")
        for k, v in traj.metadata.items():
            fh.write(f"# {k}={v}\n")
        w = csv.writer(fh)
        w.writerow(["t"] + [f"x{k + 1}" for k in range(traj.n)])
        for k, row in enumerate(traj.x[realization]):
            w.writerow([repr(k * traj.dt)] + [repr(float(v)) for v in row])


def load_trajectory_csv(path) -> Trajectory:
    meta = {}
    rows = []
    with open(path, newline="") as fh:
        for line in fh:
            if line.startswith("#"):
                k, _, v = line[1:].strip().partition("=")
                meta[k] = v
                continue
            rows = list(csv.reader([line] + fh.readlines()))
            break
    x = np.array([[float(v) for v in r[1:]] for r in rows[1:]])
    dt, seed, model = float(meta.pop("dt")), int(meta.pop("seed")), meta.pop("model")
    return Trajectory(x[None], dt, seed, model, meta)


@dataclass(frozen=True)
class WelchConfig:
    segment_length: int = 2 ** 14
    overlap_fraction: float = 0.5
    window: str = "hann"
    min_segments: int = 8

    def __post_init__(self):
        if not 0 <= self.overlap_fraction < 1:
            raise ValueError("overlap_fraction must lie in [0, 1)")
        if self.segment_length < 2:
            raise ValueError("segment_length must be >= 2")

    @property
    def overlap(self) -> int:
        return int(self.segment_length * self.overlap_fraction)

    def segments(self, samples: int) -> int:
        if samples < self.segment_length:
            return 0
        return 1 + (samples - self.segment_length) // (self.segment_length - self.overlap)


@dataclass(frozen=True, eq=False)
class SpectrumEstimate:
    """Welch estimate on non-negative ordinary frequencies ``freqs``.

    ``S_hat[(i, j)]`` is the two-sided angular density at ``w = 2 pi f``.
    """

    freqs: np.ndarray
    S_hat: Dict[Tuple[int, int], np.ndarray]
    n_segments: int

    @property
    def omega(self) -> np.ndarray:
        return 2 * np.pi * self.freqs


def welch_spectrum(traj: Trajectory, pairs, wcfg: WelchConfig = WelchConfig()) -> SpectrumEstimate:
    """Segment-averaged tapered periodograms, pooled over realizations.

    Auto entries for every index in ``pairs`` are always included so that
    coherence can be formed afterwards.
    """
    x = traj.x
    per = wcfg.segments(x.shape[1])
    if per < wcfg.min_segments:
        raise TooShortError(
            f"{x.shape[1]} samples give {per} segments of {wcfg.segment_length}; "
            f"need at least {wcfg.min_segments}")
    pairs = [tuple(p) for p in pairs]
    wanted = list(dict.fromkeys(pairs + [(k, k) for p in pairs for k in p]))
    kw = dict(fs=traj.fs, window=wcfg.window, nperseg=wcfg.segment_length,
              noverlap=wcfg.overlap, detrend="constant", return_onesided=False,
              scaling="density", axis=-1)
    out = {}
    f = None
    for i, j in wanted:
        # scipy forms conj(X_i) X_j for csd(x_i, x_j)
        f, P = signal.csd(x[:, :, i], x[:, :, j], **kw)
        # density per Hz -> per rad/s, two-sided: S(w) = P(f)
        P = P.mean(axis=0)
        keep = f >= 0
        vals = P[keep]
        out[(i, j)] = vals.real.copy() if i == j else vals
    order = np.argsort(f[f >= 0])
    freqs = f[f >= 0][order]
    out = {k: v[order] for k, v in out.items()}
    return SpectrumEstimate(freqs, out, per * x.shape[0])


def coherence_estimate(est: SpectrumEstimate, i: int, j: int) -> np.ndarray:
    """``|S_ij|^2 / (S_ii S_jj)`` from segment-averaged estimates."""
    if est.n_segments < 2:
        raise ValueError("coherence from a single segment is identically 1")
    Sij = est.S_hat[(i, j)] if (i, j) in est.S_hat else np.conj(est.S_hat[(j, i)])
    k = np.abs(Sij) ** 2 / (est.S_hat[(i, i)] * est.S_hat[(j, j)])
    return np.clip(k, 0.0, 1.0)
