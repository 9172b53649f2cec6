"""``nonauto-bif``: run library operations on a JSON scenario.

Each subcommand writes ``<name>_<command>.json`` (and a CSV series where one
exists) into the output directory and prints a one-line summary.

Exit codes: 0 success, 2 a hypothesis audit reported Violated, 3 numerical
failure, 4 configuration error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from . import __version__
from .attractor_lab import (blow_up_curve, forwards_attraction, pullback_limit,
                            pullback_schedule, repeller_orbit, repeller_schedule, zero_basin)
from .bifurcation_sweep import sweep
from .errors import (ConfigError, NoConvergence, NonFiniteResult, NoTransitionFound,
                     StencilUnderflow, StepFailure, TailDivergence)
from .field_model import Family, extract_coefficients
from .hypothesis_check import VIOLATED, check_field, strict_json
from .integrator import BlowUp, StepFailed, Tolerance, advance
from .oracles import attractor_orbit_tc, exact_mu0_sn, exact_tc, repeller_orbit_tc
from .scenario import Scenario, load_scenario

EXIT_OK, EXIT_VIOLATED, EXIT_NUMERICAL, EXIT_CONFIG = 0, 2, 3, 4

_NUMERICAL = (StepFailure, NoConvergence, TailDivergence, StencilUnderflow, NonFiniteResult)


@dataclass
class Result:
    summary: str
    report: dict
    csv: Optional[str] = None
    code: int = EXIT_OK


def _rows(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow(["" if v is None else repr(v) if isinstance(v, float) else v for v in row])
    return buf.getvalue()


def _integ_tol(run: dict, override: Optional[float] = None) -> Tolerance:
    rel = override if override is not None else run.get("rtol", 1e-9)
    return Tolerance(rel, run.get("atol", 1e-12))


def _fmt(x) -> str:
    return "none" if x is None else f"{x:.10g}"


# -- subcommands ----------------------------------------------------------------

def cmd_simulate(sc, field, run):
    s, x0 = run.get("s", 0.0), run.get("x0", 1.0)
    t_end = run.get("t_end", s + 1.0)
    traj = advance(field, s, x0, t_end, _integ_tol(run, run.get("tol")))
    out = traj.outcome
    if isinstance(out, StepFailed):
        raise StepFailure(out.t_fail)
    if isinstance(out, BlowUp):
        summary = f"BlowUp at t*={_fmt(out.t_star)} (sign {out.sign:+d})"
    else:
        summary = f"Completed: x({_fmt(traj.t_end)}) = {_fmt(traj.x_end)}"
    report = {"s": s, "x0": x0, "t_end": t_end, **traj.to_json()}
    return Result(summary, report, traj.to_csv())


def _limit(sc, field, run, backward):
    t, tol = run.get("t", 0.0), run.get("tol", 1e-6)
    doublings = run.get("doublings", 8)
    if backward:
        x0 = run.get("x0", 0.0)
        est = repeller_orbit(field, t, x0, repeller_schedule(t, doublings), tol, _integ_tol(run))
        what = "repeller"
    else:
        x0 = run.get("x0", 1.0)
        est = pullback_limit(field, t, x0, pullback_schedule(t, doublings), tol, _integ_tol(run))
        what = "pullback"
    summary = f"{what} {est.verdict}: x({_fmt(t)}) = {_fmt(est.limit)}"
    return Result(summary, est.to_json(), est.to_csv())


def cmd_pullback(sc, field, run):
    return _limit(sc, field, run, backward=False)


def cmd_repeller(sc, field, run):
    return _limit(sc, field, run, backward=True)


def cmd_forwards(sc, field, run):
    s, x0 = run.get("s", 0.0), run.get("x0", 1.0)
    ref = run.get("reference", 0.0)
    est = forwards_attraction(field, s, x0, ref, run.get("horizon", 50.0),
                              run.get("tol", 1e-6), run.get("points", 12), _integ_tol(run))
    final = est.distances[-1] if est.distances else None
    summary = f"forwards {est.verdict} towards {_fmt(ref)}: final distance {_fmt(final)}"
    csv_text = _rows(["t", "distance"], zip(est.times, est.distances))
    return Result(summary, est.to_json(), csv_text)


def cmd_blowup(sc, field, run):
    grid = run.get("s_grid", [run.get("s", 0.0)])
    x0 = run.get("x0", 1.0)
    t_max = run.get("t_max", max(grid) + 10.0)
    curve = blow_up_curve(field, grid, x0, t_max, _integ_tol(run, run.get("tol")))
    rows = []
    for s, r in curve.entries:
        esc = isinstance(r, BlowUp)
        rows.append((s, r.kind, r.t_star if esc else None, r.sign if esc else None))
    escaped = sum(1 for _, r in curve.entries if isinstance(r, BlowUp))
    summary = (f"{escaped}/{len(curve.entries)} start times escape before t={_fmt(t_max)}; "
               f"sigma = {_fmt(curve.sigma)}")
    return Result(summary, curve.to_json(), _rows(["s", "kind", "t_star", "sign"], rows))


def cmd_basin(sc, field, run):
    t = run.get("t", 0.0)
    probes = run.get("probe_grid", [-0.4, -0.2, 0.2, 0.4, 0.8])
    sched = pullback_schedule(t, run.get("doublings", 20))
    est = zero_basin(field, t, probes, sched, run.get("tol", 1e-3), _integ_tol(run))
    summary = f"zero basin at t={_fmt(t)}: delta = {_fmt(est.delta)}"
    return Result(summary, est.to_json(), _rows(["x0", "verdict", "limit"], est.probes))


def cmd_oracle(sc, field, run):
    fam, mu = field.family, field.mu
    quad_tol = run.get("tol", 1e-12)
    s, t, x0 = run.get("s"), run.get("t", 0.0), run.get("x0")
    report = {"family": fam.value, "mu": mu}
    orbit = []
    if fam is Family.CONCRETE_TC:
        if field.f.antiderivative is None:
            raise ConfigError("the transcritical oracle needs the antiderivative F", "field/F")
        ts = run.get("t_samples", [t])
        if mu > 0:
            name = "attractor"
            orbit = [(r, attractor_orbit_tc(field.m, field.n, mu, field.f, field.g, r, quad_tol))
                     for r in ts]
        elif mu < 0:
            name = "repeller"
            orbit = [(r, repeller_orbit_tc(field.m, field.n, mu, field.f, field.g, r, quad_tol,
                                           signed=True)) for r in ts]
        else:
            name = "zero"
            orbit = [(r, 0.0) for r in ts]
        report["orbit"] = {"kind": name, "x_mu": [{"t": r, "x": x} for r, x in orbit]}
        solve = lambda: exact_tc(field.m, field.n, mu, field.f, field.g, s, t, x0, quad_tol)  # noqa: E731
    elif fam is Family.CONCRETE_SN:
        if mu != 0:
            raise ConfigError("the saddle-node closed form exists only at mu = 0", "field/mu")
        solve = lambda: exact_mu0_sn(field.n, field.g, s, t, x0, quad_tol)  # noqa: E731
    else:
        raise ConfigError(f"no closed form for family {fam.value}", "field/family")

    parts = []
    if orbit:
        r0, v0 = next(((r, v) for r, v in orbit if r == t), orbit[0])
        parts.append(f"{report['orbit']['kind']} x_mu({_fmt(r0)}) = {_fmt(v0)}")
    if s is not None and x0 is not None and t >= s:
        value = solve()
        if isinstance(value, BlowUp):
            report["solution"] = {"s": s, "t": t, "x0": x0, "kind": "BlowUp",
                                  "t_star": value.t_star, "sign": value.sign}
            parts.append(f"solution escapes at t*={_fmt(value.t_star)}")
        else:
            report["solution"] = {"s": s, "t": t, "x0": x0, "kind": "Completed", "x": value}
            parts.append(f"S({_fmt(t)}, {_fmt(s)}) {_fmt(x0)} = {_fmt(value)}")
    if not parts:
        raise ConfigError("oracle needs run.s and run.x0 (or a transcritical field)", "run")
    csv_text = _rows(["t", "x_mu"], orbit) if orbit else None
    return Result("; ".join(parts), report, csv_text)


def cmd_check(sc, field, run):
    horizons = tuple(run.get("horizons", (1e2, 1e3, 1e4)))
    report = check_field(field, horizons, tuple(run.get("mu_probe", (-0.5, 0.5))))
    detail = ", ".join(f"{e.condition_id} {e.verdict}" for e in report.entries)
    summary = f"{report.theorem}: {report.verdict} ({detail})"
    rows = [(e.condition_id, e.verdict, e.note) for e in report.entries]
    code = EXIT_VIOLATED if any(e.verdict == VIOLATED for e in report.entries) else EXIT_OK
    return Result(summary, report.to_json(), _rows(["condition_id", "verdict", "note"], rows),
                  code)


def cmd_extract(sc, field, run):
    hint = run.get("family_hint", field.kind)
    if hint is None:
        raise ConfigError("black-box fields need run.family_hint (SN or TC)", "run/family_hint")
    ts = run.get("t_samples", [0.5, 1.0, 2.0])
    box = field if field.family is Family.BLACKBOX else field.blackbox()
    est = extract_coefficients(box.G, field.m, field.n, hint, ts, run.get("step"))
    rows = []
    for e in est:
        row = {"t": e.t, "f_hat": e.f_hat, "g_hat": e.g_hat, "f_err": e.f_err, "g_err": e.g_err}
        if field.f is not None and field.g is not None:
            row.update(f_true=field.f(e.t), g_true=field.g(e.t))
        rows.append(row)
    header = list(rows[0]) if rows else ["t", "f_hat", "g_hat", "f_err", "g_err"]
    summary = f"extracted {hint} coefficients at {len(rows)} times: " + ", ".join(
        f"t={_fmt(r['t'])} f={_fmt(r['f_hat'])} g={_fmt(r['g_hat'])}" for r in rows)
    report = {"family_hint": hint, "m": field.m, "n": field.n, "estimates": rows}
    return Result(summary, report, _rows(header, [[r[k] for k in header] for r in rows]))


def cmd_sweep(sc, field, run):
    try:
        diagram = sweep(field, sc.mu_grid, run.get("mu_tol", 0.125), tol=run.get("tol", 1e-6))
    except NoTransitionFound as exc:
        return Result(f"no transition found: {exc}", {"error": "NoTransitionFound",
                                                      "message": str(exc)}, None, EXIT_NUMERICAL)
    lo, hi = diagram.bracket
    return Result(f"{diagram.label} at mu in [{lo!r}, {hi!r}]", diagram.to_json(),
                  diagram.to_csv())


COMMANDS = {
    "simulate": (cmd_simulate, "integrate one trajectory"),
    "pullback": (cmd_pullback, "pullback limit as the start time recedes"),
    "repeller": (cmd_repeller, "pullback repeller from later start times"),
    "forwards": (cmd_forwards, "forwards attraction towards a constant reference"),
    "blowup": (cmd_blowup, "finite-time escape over a grid of start times"),
    "basin": (cmd_basin, "pullback basin of the zero solution"),
    "oracle": (cmd_oracle, "closed-form solutions and orbits"),
    "check": (cmd_check, "audit the hypotheses on the coefficients"),
    "extract": (cmd_extract, "recover f and g from the field by differentiation"),
    "sweep": (cmd_sweep, "classify a mu grid and bracket the bifurcation"),
}


# -- driver ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nonauto-bif", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True,
                       help="scenario JSON file, or the name of a bundled scenario")
        p.add_argument("--mu", type=float, help="override field.mu")
        p.add_argument("--out", help="output directory (default: run.out or .)")
        p.add_argument("--tol", type=float, help="override run.tol")
    return parser


def _write(out_dir: Path, stem: str, report: dict, csv_text: Optional[str]) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    text = json.dumps(strict_json(report), sort_keys=True, indent=2, allow_nan=False)
    (out_dir / f"{stem}.json").write_text(text + "\n", encoding="utf-8")
    if csv_text is not None:
        (out_dir / f"{stem}.csv").write_text(csv_text, encoding="utf-8")


def execute(command: str, sc: Scenario, mu: Optional[float] = None,
            tol: Optional[float] = None) -> Result:
    """Run one subcommand on a loaded scenario and wrap its result in the report envelope."""
    if tol is not None and not tol > 0:
        raise ConfigError("--tol must be positive", "--tol")
    run = dict(sc.run)
    if tol is not None:
        run["tol"] = tol
    field = sc.field_at(mu)
    try:
        result = COMMANDS[command][0](sc, field, run)
    except ValueError as exc:
        raise ConfigError(str(exc), command) from None
    overrides = {k: v for k, v in (("mu", mu), ("tol", tol)) if v is not None}
    result.report = {"scenario": sc.name, "command": command, "config_sha256": sc.sha256,
                     "overrides": overrides, "summary": result.summary, "result": result.report}
    return result


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        sc = load_scenario(args.config)
        result = execute(args.command, sc, args.mu, args.tol)
        _write(Path(args.out or sc.run.get("out", ".")), f"{sc.name}_{args.command}",
               result.report, result.csv)
    except ConfigError as exc:
        print(f"nonauto-bif: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except _NUMERICAL as exc:
        print(f"nonauto-bif: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    print(result.summary)
    return result.code


if __name__ == "__main__":
    sys.exit(main())
