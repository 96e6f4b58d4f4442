"""``ltispec`` command line.

Element indices and ``--pairs`` are one-based.  Frequencies are ordinary
frequencies ``f``; the analytic spectra are evaluated at ``w = 2 pi f`` and
reported in the angular-density convention of :data:`ltispec.io.CONVENTION`.

Exit codes: 0 ok, 2 bad input, 3 unstable Jacobian, 4 numerical failure,
5 simulation blow-up.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .elementwise import all_element_coeffs
from .io import CONVENTION, DocumentError, SpectrumDocument, read_system
from .models import MODELS, ConvergenceError, fixed_point, get_model, linearize
from .recursive import residuals, solve_recursive
from .sim import BlowUpError, SimConfig, WelchConfig, coherence_estimate, save_trajectory_csv, \
    simulate_model, welch_spectrum
from .spectral import default_grid, spectrum_pairs
from .system import StabilityError, require_hurwitz

EXIT_OK, EXIT_PARSE, EXIT_STABILITY, EXIT_NUMERICAL, EXIT_BLOWUP = 0, 2, 3, 4, 5


class UsageError(ValueError):
    pass


# Argument parsing -------------------------------------------------------------

def parse_pairs(text: str, n: int):
    """``"1,1;1,2"`` -> ``[(0, 0), (0, 1)]``."""
    pairs = []
    for chunk in filter(None, (c.strip() for c in text.split(";"))):
        try:
            i, j = (int(x) for x in chunk.split(","))
        except ValueError:
            raise UsageError(f"--pairs: cannot parse {chunk!r}; expected 'i,j'") from None
        if not (1 <= i <= n and 1 <= j <= n):
            raise UsageError(f"--pairs: ({i},{j}) out of range 1..{n}")
        pairs.append((i - 1, j - 1))
    if not pairs:
        raise UsageError("--pairs: no pairs given")
    return pairs


def parse_freqs(text: str):
    """``"a:b:n:log|lin"`` in Hz."""
    parts = text.split(":")
    if len(parts) != 4 or parts[3] not in ("log", "lin"):
        raise UsageError(f"--freqs: expected min:max:count:log|lin, got {text!r}")
    try:
        lo, hi, count = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise UsageError(f"--freqs: non-numeric field in {text!r}") from None
    if count < 1 or hi < lo or (parts[3] == "log" and lo <= 0):
        raise UsageError(f"--freqs: invalid grid {text!r}")
    return np.geomspace(lo, hi, count) if parts[3] == "log" else np.linspace(lo, hi, count)


def parse_params(items, path=None):
    params = {}
    if path:
        try:
            params.update(json.loads(Path(path).read_text()))
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"--params-file: {exc}") from None
    for item in items or []:
        key, sep, value = item.partition("=")
        if not sep or not key:
            raise UsageError(f"--param: expected k=v, got {item!r}")
        value = value.strip()
        try:
            params[key.strip()] = json.loads(value)
        except json.JSONDecodeError:
            params[key.strip()] = value
    return params


def load_input(args):
    """``(LtiSystem, model_or_None, provenance dict)`` from ``--system`` or ``--model``."""
    if bool(args.system) == bool(args.model):
        raise UsageError("give exactly one of --system or --model")
    if args.system:
        return read_system(args.system), None, {"system": str(args.system)}
    params = parse_params(args.param, getattr(args, "params_file", None))
    try:
        model = get_model(args.model, **params)
    except KeyError as exc:
        raise UsageError(exc.args[0]) from None
    return linearize(model, fixed_point(model)), model, {"model": args.model, "params": model.params}


def _index(text: str, n: int):
    pair = parse_pairs(text, n)
    if len(pair) != 1:
        raise UsageError("--element takes a single 'i,j'")
    return pair[0]


def _meta(method, prov, **extra):
    return {"method": method, "version": __version__, "convention": CONVENTION, **prov, **extra}


def _emit(text: str, out):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


# Commands ---------------------------------------------------------------------

def cmd_coeffs(args):
    system, _, prov = load_input(args)
    if args.method == "recursive":
        sr = solve_recursive(system, allow_marginal=args.allow_marginal)
        rep = residuals(sr, system.J, system.covariance())
        doc = {"q": sr.q.coeffs.tolist(), "P": sr.P.tolist(), "Pp": sr.Pp.tolist(),
               "residuals": {"r1": rep.r1, "r2": rep.r2, "rel1": rep.rel1, "rel2": rep.rel2}}
    else:
        require_hurwitz(system.J, allow_marginal=args.allow_marginal)
        i, j = _index(args.element or "1,1", system.n)
        ec = all_element_coeffs(system, pairs=[(i, j)])[(i, j)]
        sr_q = solve_recursive(system, check_stability=False).q
        doc = {"element": [i + 1, j + 1], "q": sr_q.coeffs.tolist(),
               "p": ec.p.coeffs.tolist(), "pp": ec.pp.coeffs.tolist()}
    doc["metadata"] = _meta(args.method, prov)
    _emit(json.dumps(doc, indent=1) + "\n", args.out)


def _grid(args, system):
    if args.freqs:
        return parse_freqs(args.freqs)
    return default_grid(system.J) / (2 * np.pi)


def cmd_spectrum(args):
    system, _, prov = load_input(args)
    pairs = parse_pairs(args.pairs, system.n) if args.pairs else [(0, 0)]
    f = _grid(args, system)
    wanted = list(dict.fromkeys(pairs + ([(k, k) for p in pairs for k in p] if args.coherence else [])))
    vals = spectrum_pairs(system, 2 * np.pi * f, wanted, args.method, allow_marginal=args.allow_marginal)
    values = {p: vals[p].real if p[0] == p[1] else vals[p] for p in wanted}
    extra = {}
    if args.coherence:
        for i, j in pairs:
            if i != j:
                extra[f"K_{i + 1}_{j + 1}"] = np.abs(vals[(i, j)]) ** 2 / (vals[(i, i)].real * vals[(j, j)].real)
    doc = SpectrumDocument(f, values, _meta(args.method, prov), extra)
    if args.out:
        doc.write(args.out)
    else:
        sys.stdout.write(doc.to_csv())


def _sim_config(args, model):
    dt = args.dt if args.dt else model.dt
    rec = args.record_every if args.record_every else model.record_every
    seg = args.segment_length
    per = max(args.segments_per_realization, 8)
    t_total = args.t_total if args.t_total else (seg // 2 * (per + 1) * rec + 1) * dt + args.burn_in
    return SimConfig(dt=dt, t_total=t_total, burn_in=args.burn_in, seed=args.seed,
                     record_every=rec, realizations=args.realizations)


def _welch(args, model, pairs):
    cfg = _sim_config(args, model)
    traj = simulate_model(model, cfg)
    wcfg = WelchConfig(segment_length=args.segment_length, overlap_fraction=args.overlap)
    return traj, welch_spectrum(traj, pairs, wcfg), cfg


def cmd_simulate(args):
    if not args.model:
        raise UsageError("simulate needs --model")
    params = parse_params(args.param, args.params_file)
    try:
        model = get_model(args.model, **params)
    except KeyError as exc:
        raise UsageError(exc.args[0]) from None
    n_obs = model.n + (1 if model.expand else 0)
    pairs = parse_pairs(args.pairs, n_obs) if args.pairs else [(0, 0)]
    traj, est, cfg = _welch(args, model, pairs)
    if args.trajectory_out:
        save_trajectory_csv(traj, args.trajectory_out)
    keep = est.freqs > 0
    values = {k: v[keep] for k, v in est.S_hat.items()}
    extra = {f"K_{i + 1}_{j + 1}": coherence_estimate(est, i, j)[keep] for i, j in pairs if i != j}
    meta = _meta("welch", {"model": model.name, "params": model.params}, seed=cfg.seed, dt=cfg.dt,
                 record_every=cfg.record_every, realizations=cfg.realizations,
                 segments=est.n_segments, segment_length=args.segment_length, **traj.metadata)
    doc = SpectrumDocument(est.freqs[keep], values, meta, extra)
    if args.out:
        doc.write(args.out)
    else:
        sys.stdout.write(doc.to_csv())


def _max_rel(a, b, scale):
    return float(np.max(np.abs(a - b) / scale))


def cmd_compare(args):
    system, model, prov = load_input(args)
    pairs = parse_pairs(args.pairs, system.n) if args.pairs else [(0, 0)]
    f = _grid(args, system)
    w = 2 * np.pi * f
    autos = sorted({k for p in pairs for k in p})
    wanted = list(dict.fromkeys(pairs + [(k, k) for k in autos]))
    oracle = spectrum_pairs(system, w, wanted, "oracle", allow_marginal=args.allow_marginal)
    rec = spectrum_pairs(system, w, pairs, "recursive", allow_marginal=args.allow_marginal)
    elw = spectrum_pairs(system, w, pairs, "elementwise", allow_marginal=args.allow_marginal)
    report = {"metadata": _meta("compare", prov, tolerance=args.tol), "pairs": {}}
    ok = True
    for i, j in pairs:
        # off-diagonal entries are measured against sqrt(S_ii S_jj)
        scale = np.sqrt(np.abs(oracle[(i, i)]) * np.abs(oracle[(j, j)]))
        entry = {"recursive_vs_oracle": _max_rel(rec[(i, j)], oracle[(i, j)], scale),
                 "elementwise_vs_oracle": _max_rel(elw[(i, j)], oracle[(i, j)], scale),
                 "recursive_vs_elementwise": _max_rel(rec[(i, j)], elw[(i, j)], scale)}
        entry["pass"] = max(entry.values()) <= args.tol
        ok &= entry["pass"]
        report["pairs"][f"{i + 1},{j + 1}"] = entry
    if args.welch:
        if model is None:
            raise UsageError("--welch needs --model")
        _, est, cfg = _welch(args, model, pairs)
        band = _mid_band(est.freqs)
        sr = solve_recursive(system, allow_marginal=args.allow_marginal)
        S = sr(est.omega[band])
        for i, j in pairs:
            if i == j:
                r = np.log10(est.S_hat[(i, i)][band] / S[:, i, i].real)
                report["pairs"][f"{i + 1},{j + 1}"]["welch_median_abs_log10_ratio"] = float(np.median(np.abs(r)))
        report["metadata"].update(seed=cfg.seed, segments=est.n_segments)
    report["pass"] = bool(ok)
    _emit(json.dumps(report, indent=1) + "\n", args.out)
    return EXIT_OK if ok else EXIT_NUMERICAL


def _mid_band(freqs):
    """Middle two decades (log-centred) of the positive resolvable band."""
    pos = freqs[freqs > 0]
    c = np.sqrt(pos[0] * pos[-1])
    return (freqs >= c / 10) & (freqs <= c * 10)


def cmd_models(args):
    out = {}
    for name, builder in MODELS.items():
        m = builder()
        out[name] = {"n": m.n, "labels": m.labels, "params": m.params, "dt": m.dt,
                     "record_every": m.record_every}
    _emit(json.dumps(out, indent=1) + "\n", args.out)


# Entry point ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ltispec", description="Rational PSD of stochastic LTI systems.")
    ap.add_argument("--version", action="version", version=f"ltispec {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def inputs(p):
        p.add_argument("--system", help="SystemDocument JSON file")
        p.add_argument("--model", choices=sorted(MODELS), help="model from the zoo")
        p.add_argument("--param", action="append", metavar="K=V", help="model parameter override")
        p.add_argument("--params-file", help="JSON object of model parameters")
        p.add_argument("--allow-marginal", action="store_true")
        p.add_argument("--out", help="output file (.json or .csv); stdout by default")

    def sim_opts(p):
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--dt", type=float, help="integration step (model default)")
        p.add_argument("--t-total", type=float, help="duration (sized for the Welch setup by default)")
        p.add_argument("--burn-in", type=float, default=0.0)
        p.add_argument("--record-every", type=int, help="keep every k-th step (model default)")
        p.add_argument("--realizations", type=int, default=1)
        p.add_argument("--segments-per-realization", type=int, default=8)
        p.add_argument("--segment-length", type=int, default=2 ** 14)
        p.add_argument("--overlap", type=float, default=0.5)

    p = sub.add_parser("coeffs", help="rational-function coefficients as JSON")
    inputs(p)
    p.add_argument("--method", choices=["recursive", "elementwise"], default="recursive")
    p.add_argument("--element", help="'i,j' for --method elementwise (default 1,1)")
    p.set_defaults(func=cmd_coeffs)

    p = sub.add_parser("spectrum", help="evaluate spectra on a frequency grid")
    inputs(p)
    p.add_argument("--freqs", help="min:max:count:log|lin in Hz")
    p.add_argument("--pairs", help="'i,j;k,l' (one-based)")
    p.add_argument("--method", choices=["recursive", "elementwise", "oracle"], default="recursive")
    p.add_argument("--coherence", action="store_true", help="add K_i_j columns for cross pairs")
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("simulate", help="Euler-Maruyama run plus Welch estimate")
    inputs(p)
    sim_opts(p)
    p.add_argument("--pairs")
    p.add_argument("--trajectory-out", help="CSV of the first realization")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("compare", help="recursive vs element-wise vs oracle (optionally Welch)")
    inputs(p)
    sim_opts(p)
    p.add_argument("--freqs")
    p.add_argument("--pairs")
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--welch", action="store_true", help="also simulate and compare auto-spectra")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("models", help="list models and default parameters")
    p.add_argument("--out")
    p.set_defaults(func=cmd_models)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        code = args.func(args)
    except (UsageError, DocumentError, KeyError) as exc:
        print(f"ltispec: error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except StabilityError as exc:
        print(f"ltispec: unstable: {exc}", file=sys.stderr)
        return EXIT_STABILITY
    except BlowUpError as exc:
        print(f"ltispec: blow-up at step {exc.step}", file=sys.stderr)
        return EXIT_BLOWUP
    except (ArithmeticError, ConvergenceError, np.linalg.LinAlgError) as exc:
        print(f"ltispec: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:
        print(f"ltispec: error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    return EXIT_OK if code is None else code


if __name__ == "__main__":
    sys.exit(main())
