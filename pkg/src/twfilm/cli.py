"""Command-line front end: ``twfilm solve | phase | verify | sweep``.

Exit codes: 0 success, 2 invalid input, 3 non-convergence or failed sweep
rows, 4 model not compliant for the regime, 5 verification failure.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import itertools
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ComplianceError, DomainError, InvariantError, ProfileFormatError, TwfilmError
from .phase_plane import classify_quadrant, critical_height, f1, f2, select_gamma_bar
from .profile import RegimeParams
from .profile_io import format_float, read_profile, write_keyvalue, write_profile
from .shooting import gamma_0s, heteroclinic
from .solver import SolveSettings, solve_profile
from .surface_tension import parse_model_spec
from .verify import verify_profile

EXIT_OK, EXIT_INVALID, EXIT_CONVERGENCE, EXIT_COMPLIANCE, EXIT_VERIFY = 0, 2, 3, 4, 5


def exit_code_for(exc: Exception) -> int:
    if isinstance(exc, ComplianceError):
        return EXIT_COMPLIANCE
    if isinstance(exc, (DomainError, ValueError)):
        return EXIT_INVALID
    return EXIT_CONVERGENCE


def _fail(exc: Exception) -> int:
    code = exit_code_for(exc)
    print(f"twfilm: error: {exc}", file=sys.stderr)
    return code


def _settings(args) -> SolveSettings:
    return SolveSettings(xi_min=args.xi_min, xi_max=args.xi_max, samples=args.samples,
                         gamma_anchor=args.gamma_anchor, tol_bisect=args.tol_bisect, eps_saddle=args.eps_saddle)


def endpoint_errors(profile, params) -> tuple[float, float, float, float]:
    Hs = params.H_star
    return (float(abs(profile.H[0] - 2 * Hs)), float(abs(profile.Gamma[0] - 1.0)),
            float(abs(profile.H[-1] - Hs)), float(abs(profile.Gamma[-1])))


def _solve_and_report(model, params, settings):
    profile, outcome = solve_profile(model, params, settings)
    profile.meta.update({"xi_min": format_float(settings.xi_min), "xi_max": format_float(settings.xi_max),
                         "samples": str(settings.samples)})
    report = verify_profile(profile, model, params)
    return profile, outcome, report


def cmd_solve(args) -> int:
    try:
        model = parse_model_spec(args.sigma)
        params = RegimeParams(args.G, args.D, args.hstar)
        profile, _, report = _solve_and_report(model, params, _settings(args))
    except TwfilmError as exc:
        return _fail(exc)
    write_profile(profile, args.out, args.meta_out)
    errs = endpoint_errors(profile, params)
    print(f"regime={params.regime.value} samples={len(profile)} "
          f"endpoint_errors={','.join(f'{e:.3e}' for e in errs)} "
          f"ode_residual={report.ode_residual_max:.3e} weak_residual={report.weak_residual_max:.3e} "
          f"verified={'yes' if report.passed else 'no'}")
    return EXIT_OK


def cmd_phase(args) -> int:
    try:
        model = parse_model_spec(args.sigma)
        params = RegimeParams(args.G, args.D, args.hstar)
        if params.G <= 0.0 or params.D <= 0.0:
            raise DomainError("the phase plane needs G > 0 and D > 0")
        if args.grid < 2:
            raise DomainError("--grid needs at least 2 points per axis")
        geo = select_gamma_bar(model, params)
        n, Hs = args.grid, params.H_star
        frac = np.arange(1, n + 1) / (n + 1)
        H_axis, G_axis = Hs * (1.0 + frac), frac
        HH, GG = np.meshgrid(H_axis, G_axis, indexing="ij")
        F1, F2 = f1(model, params, HH, GG), f2(model, params, HH, GG)
        Hc = [critical_height(model, params, float(g)) for g in G_axis]
        g0s = gamma_0s(model, params, geo)
        outcome = heteroclinic(model, params, tol_bisect=args.tol_bisect, eps_saddle=args.eps_saddle, geometry=geo)
    except TwfilmError as exc:
        return _fail(exc)
    out = Path(args.out)
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["H", "Gamma", "f1", "f2", "quadrant"])
        for h, g, a, b in zip(HH.ravel(), GG.ravel(), F1.ravel(), F2.ravel()):
            quadrant = classify_quadrant(geo, float(h), float(g)).value
            w.writerow([format_float(h), format_float(g), format_float(a), format_float(b), quadrant])
    with open(out.with_name(out.stem + "_nullcline.csv"), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["Gamma", "H_c"])
        for g, h in zip(G_axis, Hc):
            w.writerow([format_float(g), format_float(h)])
    lo, hi = outcome.bracket
    write_keyvalue({
        "model": model.spec, "G": params.G, "D": params.D, "H_star": params.H_star,
        "gamma_bar": geo.gamma_bar, "H_bar": geo.H_bar, "mu": geo.mu, "gamma_0s": g0s,
        "gamma_star": outcome.gamma_star, "bracket_lo": lo, "bracket_hi": hi,
        "saddle": f"{format_float(2 * params.H_star)},1.0", "sink": f"{format_float(params.H_star)},0.0",
        "tool_version": __version__,
    }, args.meta_out or out.with_suffix(".meta"))
    print(f"grid_rows={n * n} gamma_bar={geo.gamma_bar!r} H_bar={geo.H_bar!r} gamma_0s={g0s!r} "
          f"gamma_star={outcome.gamma_star!r}")
    return EXIT_OK


def cmd_verify(args) -> int:
    try:
        profile = read_profile(args.profile, args.meta_in)
        meta = profile.meta
        spec = args.sigma or meta.get("model")
        if spec is None:
            raise DomainError("no model in the metadata; pass --sigma")
        model = parse_model_spec(spec)
        values = {}
        for flag, key in (("G", "G"), ("D", "D"), ("hstar", "H_star")):
            given = getattr(args, flag)
            if given is None:
                if key not in meta:
                    raise DomainError(f"no {key} in the metadata; pass --{flag}")
                given = float(meta[key])
            values[key] = given
        params = RegimeParams(values["G"], values["D"], values["H_star"])
    except (TwfilmError, OSError) as exc:
        print(f"twfilm: error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    report = verify_profile(profile, model, params)
    text = "".join(line + "\n" for line in report.as_lines())
    if args.out:
        with open(args.out, "w", newline="\n") as fh:
            fh.write(text)
    sys.stdout.write(text)
    return EXIT_OK if report.passed else EXIT_VERIFY


# -- sweep ------------------------------------------------------------------------------

_SWEEP_KEYS = {"sigma", "G", "D", "H_star", "hstar", "sigma0", "a", "b", "beta",
               "xi_min", "xi_max", "samples", "gamma_anchor", "tol_bisect", "eps_saddle"}
_MODEL_FIELDS = ("sigma0", "a", "b", "beta")


def parse_sweep(text: str) -> list[dict[str, str]]:
    """Cartesian product of ``key=v1,v2,...`` lines, in file order (last key varies fastest)."""
    axes: dict[str, list[str]] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep or key not in _SWEEP_KEYS:
            raise DomainError(f"sweep line {lineno}: expected key=value with key in {sorted(_SWEEP_KEYS)}")
        key = "H_star" if key == "hstar" else key
        if key in axes:
            raise DomainError(f"sweep line {lineno}: duplicate key {key}")
        axes[key] = [v.strip() for v in value.split(",") if v.strip()]
        if not axes[key]:
            raise DomainError(f"sweep line {lineno}: no values for {key}")
    for needed in ("sigma", "G", "D", "H_star"):
        if needed not in axes:
            raise DomainError(f"sweep file lacks {needed}")
    keys = list(axes)
    return [dict(zip(keys, combo)) for combo in itertools.product(*(axes[k] for k in keys))]


def _run_combo(task):
    index, combo, out_dir = task
    stem = Path(out_dir) / f"run_{index:04d}"
    row = {"run": f"run_{index:04d}", **{k: combo[k] for k in ("sigma", "G", "D", "H_star")},
           "model_overrides": ";".join(f"{k}={combo[k]}" for k in _MODEL_FIELDS if k in combo)}
    try:
        model = parse_model_spec(combo["sigma"])
        overrides = {k: float(combo[k]) for k in _MODEL_FIELDS if k in combo}
        if overrides:
            model = dataclasses.replace(model, **overrides)
        params = RegimeParams(float(combo["G"]), float(combo["D"]), float(combo["H_star"]))
        defaults = SolveSettings()
        settings = SolveSettings(
            xi_min=float(combo.get("xi_min", defaults.xi_min)), xi_max=float(combo.get("xi_max", defaults.xi_max)),
            samples=int(combo.get("samples", defaults.samples)),
            gamma_anchor=float(combo.get("gamma_anchor", defaults.gamma_anchor)),
            tol_bisect=float(combo.get("tol_bisect", defaults.tol_bisect)),
            eps_saddle=float(combo.get("eps_saddle", defaults.eps_saddle)))
        profile, outcome, report = _solve_and_report(model, params, settings)
    except (TwfilmError, ValueError, TypeError) as exc:
        return {**row, "status": f"failed({exit_code_for(exc)})", "message": str(exc).replace("\n", " ")}
    write_profile(profile, stem.with_suffix(".csv"))
    with open(stem.with_suffix(".report"), "w", newline="\n") as fh:
        fh.write("".join(line + "\n" for line in report.as_lines()))
    errs = endpoint_errors(profile, params)
    return {**row, "status": "ok" if report.passed else "unverified", "message": "",
            "gamma_star": format_float(outcome.gamma_star) if outcome else "",
            "err_left_H": format_float(errs[0]), "err_left_Gamma": format_float(errs[1]),
            "err_right_H": format_float(errs[2]), "err_right_Gamma": format_float(errs[3]),
            "ode_residual": format_float(report.ode_residual_max),
            "weak_residual": format_float(report.weak_residual_max)}


SUMMARY_COLUMNS = ("run", "sigma", "G", "D", "H_star", "model_overrides", "status", "gamma_star",
                   "err_left_H", "err_left_Gamma", "err_right_H", "err_right_Gamma",
                   "ode_residual", "weak_residual", "message")


def sweep_workers(count: int) -> int:
    raw = os.environ.get("TWFILM_THREADS", "")
    try:
        cap = int(raw) if raw else (os.cpu_count() or 1)
    except ValueError:
        cap = 1
    return max(1, min(cap, count))


def cmd_sweep(args) -> int:
    try:
        with open(args.config) as fh:
            combos = parse_sweep(fh.read())
    except (TwfilmError, OSError) as exc:
        print(f"twfilm: error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    tasks = [(i, c, str(out_dir)) for i, c in enumerate(combos)]
    workers = sweep_workers(len(tasks))
    if workers == 1:
        rows = [_run_combo(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_run_combo, tasks))
    with open(out_dir / "summary.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, SUMMARY_COLUMNS, restval="", lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
    failed = [r for r in rows if r["status"] != "ok"]
    print(f"runs={len(rows)} ok={len(rows) - len(failed)} failed={len(failed)}")
    return EXIT_OK if not failed else EXIT_CONVERGENCE


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="twfilm", description="Traveling waves of a thin film with surfactant.")
    parser.add_argument("--version", action="version", version=f"twfilm {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    d = SolveSettings()

    def model_flags(p, fallback=True):
        # solve/phase fall back to the unit heteroclinic case; verify falls back to the metadata
        p.add_argument("--sigma", default="szyszkowski:1:1" if fallback else None,
                       help="isotherm, e.g. szyszkowski:1:1")
        p.add_argument("--G", type=float, default=1.0 if fallback else None, help="gravity number")
        p.add_argument("--D", type=float, default=1.0 if fallback else None, help="surface diffusivity")
        p.add_argument("--hstar", type=float, default=1.0 if fallback else None, help="far-field height H*")

    def numeric_flags(p):
        p.add_argument("--xi-min", type=float, default=d.xi_min)
        p.add_argument("--xi-max", type=float, default=d.xi_max)
        p.add_argument("--samples", type=int, default=d.samples)
        p.add_argument("--gamma-anchor", type=float, default=d.gamma_anchor, help="Gamma(0) when G = 0, D > 0")
        p.add_argument("--tol-bisect", type=float, default=d.tol_bisect)
        p.add_argument("--eps-saddle", type=float, default=d.eps_saddle)

    p = sub.add_parser("solve", help="compute a profile")
    model_flags(p)
    numeric_flags(p)
    p.add_argument("--out", default="profile.csv")
    p.add_argument("--meta-out", default=None, help="metadata path (default: OUT with .meta)")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("phase", help="phase-plane data for G > 0, D > 0")
    model_flags(p)
    numeric_flags(p)
    p.add_argument("--grid", type=int, default=101, help="points per axis")
    p.add_argument("--out", default="phase_grid.csv")
    p.add_argument("--meta-out", default=None, help="special-points path (default: OUT with .meta)")
    p.set_defaults(func=cmd_phase)

    p = sub.add_parser("verify", help="check a stored profile")
    p.add_argument("profile")
    model_flags(p, fallback=False)
    p.add_argument("--meta-in", default=None, help="metadata path (default: PROFILE with .meta)")
    p.add_argument("--out", default=None, help="also write the report here")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("sweep", help="solve a Cartesian product of parameters")
    p.add_argument("--config", default="sweep.txt", help="file of key=v1,v2,... lines")
    p.add_argument("--out", default="sweep_out", help="output directory")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except InvariantError as exc:
        print(f"twfilm: error: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except ProfileFormatError as exc:
        print(f"twfilm: error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
