"""Command-line front end: ``python -m windnav <subcommand> --scenario FILE ...``.

Every run writes its artifacts plus ``manifest.json`` into ``--out``. The
manifest embeds the scenario document and the full argument list, so
``python -m windnav replay DIR/manifest.json --out OTHER`` reproduces the run.

Exit status: 0 success, 1 validation error, 2 numerical abort, 3 unreachable
target with ``--require-reachable``, 4 failed invariant checks.
"""
from __future__ import annotations

import argparse
import json
import math
import platform
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .checks import run_checks
from .export import SvgFigure, contour_segments, fmt, write_grid_csv, write_pgm
from .geodesics import C_TOL_REL, NULL_ABORT, NULL_GROWTH, Branch, GeodesicAbort, integrate
from .metrics import H_TOL, LAMBDA_TOL, MetricDomainError, eval_h, metric_arrays
from .navigation import NoMaximizer, Verdict, max_time_path, min_time_path
from .reachability import (
    N_CONTROLS,
    CFLViolation,
    EmptyRegion,
    arrival_field,
    cauchy_development,
    disk_mask,
    k_horizon,
    propagate_front,
)
from .scenario import GridSpec, OutOfChartError, ScenarioError, load_scenario

__all__ = ["CommandSpec", "build_parser", "run", "main"]

EXIT_OK, EXIT_VALIDATION, EXIT_ABORT, EXIT_UNREACHABLE, EXIT_CHECK_FAILED = 0, 1, 2, 3, 4
SUBCOMMANDS = ("classify", "metric", "geodesic", "reach", "arrival", "navigate", "cauchy", "khorizon", "check")


class UsageError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    """Usage errors are validation errors: exit 1, not argparse's 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_VALIDATION, f"{self.prog}: error: {message}\n")


@dataclass
class CommandSpec:
    subcommand: str
    scenario_path: str | None
    params: dict
    out: Path
    argv: list = field(default_factory=list)
    document: dict | None = None  # scenario JSON; read from ``scenario_path`` when absent


# --- argument parsing ----------------------------------------------------------------

def _point(text: str) -> tuple:
    try:
        x, y = (float(s) for s in text.split(","))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected X,Y but got {text!r}") from exc
    return (x, y)


def _common() -> argparse.ArgumentParser:
    p = _Parser(add_help=False)
    p.add_argument("--scenario", required=True, help="scenario JSON file")
    p.add_argument("--out", default="out", help="output directory (default: out)")
    p.add_argument("--grid", type=int, default=None, help="cells per axis")
    p.add_argument("--dt", type=float, default=None, help="front time step (default: 0.9 of the CFL limit)")
    p.add_argument("--step", type=float, default=None, help="geodesic step (default: 1e-3 of the chart diagonal)")
    p.add_argument("--tmax", type=float, default=None, help="time horizon")
    p.add_argument("--from", dest="from_", type=_point, default=None, metavar="X,Y")
    p.add_argument("--to", type=_point, default=None, metavar="X,Y")
    p.add_argument("--branch", choices=("f", "fl"), default="f")
    p.add_argument("--require-reachable", action="store_true")
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="windnav", description="Zermelo navigation in stationary wind.")
    sub = parser.add_subparsers(dest="subcommand", required=True)
    common = _common()
    sub.add_parser("classify", parents=[common], help="wind-class raster")
    m = sub.add_parser("metric", parents=[common], help="F, F_l and h at points")
    m.add_argument("--at", type=_point, action="append", default=None, metavar="X,Y")
    m.add_argument("--vec", type=_point, action="append", default=None, metavar="VX,VY")
    g = sub.add_parser("geodesic", parents=[common], help="integrate one geodesic")
    g.add_argument("--vec", type=_point, default=None, metavar="VX,VY", help="initial velocity")
    g.add_argument("--smax", type=float, default=None, help="affine length (default: chart diagonal)")
    r = sub.add_parser("reach", parents=[common], help="c-ball stack about --from")
    r.add_argument("--radius", type=float, default=None, help="ball radius (default: --tmax or 1)")
    r.add_argument("--backward", action="store_true")
    sub.add_parser("arrival", parents=[common], help="first-arrival field from --from")
    n = sub.add_parser("navigate", parents=[common], help="min/max-time path --from --to")
    n.add_argument("--kind", choices=("min", "max"), default="min")
    for name, hint in (("cauchy", "Cauchy development of --region"), ("khorizon", "K-horizon of --region")):
        c = sub.add_parser(name, parents=[common], help=hint)
        c.add_argument("--region", required=True,
                       help="disk:CX,CY,R or half:A,B,C (cells with A x + B y + C <= 0)")
    k = sub.add_parser("check", parents=[common], help="invariant suite")
    k.add_argument("--seed", type=int, default=0)
    rp = sub.add_parser("replay", help="re-run from a manifest")
    rp.add_argument("manifest")
    rp.add_argument("--out", required=True)
    return parser


def _spec_from_args(args, argv) -> CommandSpec:
    params = {k: v for k, v in vars(args).items() if k not in ("subcommand", "scenario", "out")}
    return CommandSpec(args.subcommand, args.scenario, params, Path(args.out), list(argv))


# --- helpers ------------------------------------------------------------------------------

def _region(spec: str, grid: GridSpec) -> np.ndarray:
    kind, _, rest = spec.partition(":")
    try:
        vals = [float(s) for s in rest.split(",")]
    except ValueError as exc:
        raise UsageError(f"bad region {spec!r}") from exc
    if kind == "disk" and len(vals) == 3:
        return disk_mask(grid, vals[:2], vals[2])
    if kind == "half" and len(vals) == 3:
        X, Y = grid.mesh()
        return vals[0] * X + vals[1] * Y + vals[2] <= 0
    raise UsageError(f"bad region {spec!r}")


def _need(params, key, flag):
    if params.get(key) is None:
        raise UsageError(f"{flag} is required")
    return params[key]


def _num(v):
    if v is None:
        return None
    v = float(v)
    return v if math.isfinite(v) else None


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


# --- subcommands ----------------------------------------------------------------------------

def _classify(scn, p, out, log):
    grid = GridSpec(scn.chart, p["grid"] or 64)
    X, Y = grid.mesh()
    gxx, gxy, gyy, ox, oy, lam = scn.triple_array(X, Y)
    _, _, _, wc = metric_arrays(gxx, gxy, gyy, ox, oy, lam, 1.0, 0.0)
    names = {1: "Mild", 0: "Critical", -1: "Strong"}
    write_grid_csv(out / "classify.csv", grid, {"class": wc})
    write_pgm(out / "classify.pgm", (wc + 1) / 2.0, 0.0, 1.0)
    counts = {names[c]: int(np.sum(wc == c)) for c in (1, 0, -1)}
    for k, v in counts.items():
        log(f"{k:9s} {v}")
    return EXIT_OK, {"counts": counts}


def _metric(scn, p, out, log):
    pts = p.get("at") or ([p["from_"]] if p.get("from_") else None)
    vecs = p.get("vec")
    if not pts or not vecs:
        raise UsageError("--at (or --from) and --vec are required")
    if len(pts) == 1:
        pts = pts * len(vecs)
    if len(vecs) == 1:
        vecs = vecs * len(pts)
    if len(pts) != len(vecs):
        raise UsageError("--at and --vec counts differ")
    rows = []
    for pt, v in zip(pts, vecs):
        L = scn.local_data(pt)
        g, w = L.g0, L.omega
        F, Fl, st, wc = metric_arrays(g[0, 0], g[0, 1], g[1, 1], w[0], w[1], L.lam, v[0], v[1])
        status = ("InA", "BoundaryAE", "KropinaZero", "Outside")[int(st)]
        rows.append((pt, v, float(F), float(Fl), eval_h(L, v, v), status))
    with open(out / "metric.csv", "w") as fh:
        fh.write("x,y,vx,vy,F,Fl,h,status\n")
        for pt, v, F, Fl, h, status in rows:
            fh.write(",".join(repr(float(a)) for a in (*pt, *v, F, Fl, h)) + f",{status}\n")
    log(f"{'x':>10} {'y':>10} {'vx':>10} {'vy':>10} {'F':>14} {'F_l':>14} {'h':>14}  status")
    for pt, v, F, Fl, h, status in rows:
        log(f"{pt[0]:10.4g} {pt[1]:10.4g} {v[0]:10.4g} {v[1]:10.4g} {F:14.9g} {Fl:14.9g} {h:14.9g}  {status}")
    return EXIT_OK, {}


def _geodesic(scn, p, out, log):
    x0 = _need(p, "from_", "--from")
    v = _need(p, "vec", "--vec")
    branch = Branch.F if p["branch"] == "f" else Branch.FL
    s_max = p.get("smax") or scn.chart.diagonal
    tr = integrate(scn, x0, v, branch, s_max, p["step"])
    tr.to_csv(out / "trace.csv")
    fig = SvgFigure(scn.chart)
    fig.polyline(tr.x, "navy", 1.5, title=tr.classification.value)
    fig.marker(x0)
    fig.save(out / "trace.svg")
    log(f"classification {tr.classification.value}, C = {tr.C0:.9g}, exit {tr.exit_reason}")
    log(f"endpoint ({tr.x[-1, 0]:.9g}, {tr.x[-1, 1]:.9g}) at t = {tr.t[-1]:.9g}")
    log(f"C drift {tr.C_drift:.3e}, max null residual {tr.max_null_residual:.3e}")
    return EXIT_OK, {"classification": tr.classification.value, "C": tr.C0, "exit": tr.exit_reason}


def _reach(scn, p, out, log):
    x0 = _need(p, "from_", "--from")
    r = p.get("radius") or p.get("tmax") or 1.0
    orientation = "backward" if p.get("backward") else "forward"
    st = propagate_front(scn, x0, r, p["dt"], p["grid"] or 128, orientation)
    write_pgm(out / "reach.pgm", st.masks[-1])
    fig = SvgFigure(scn.chart)
    K = len(st.masks) - 1
    for k in sorted(set(int(round(K * f)) for f in (0.25, 0.5, 0.75, 1.0))):
        segs = contour_segments(st.grid, np.where(st.masks[k], -1.0, 1.0), 0.0)
        fig.segments(segs, "darkgreen", 1.0, title=f"t={fmt(st.times[k])}")
    fig.marker(x0)
    fig.save(out / "reach.svg")
    with open(out / "reach.csv", "w") as fh:
        fh.write("k,t,cells\n")
        for k in range(K + 1):
            fh.write(f"{k},{st.times[k]!r},{int(st.masks[k].sum())}\n")
    log(f"{orientation} c-balls up to r = {st.times[-1]:.9g} in {K} steps of {st.dt:.6g}")
    log(f"final ball covers {int(st.masks[-1].sum())} cells")
    return EXIT_OK, {"dt": st.dt, "steps": K}


def _arrival(scn, p, out, log):
    x0 = _need(p, "from_", "--from")
    af = arrival_field(scn, x0, p["grid"] or 256, T_max=p.get("tmax"))
    write_grid_csv(out / "arrival.csv", af.grid, {"tau": af.tau})
    fig = SvgFigure(scn.chart)
    fin = af.tau[np.isfinite(af.tau)]
    top = float(fin.max()) if fin.size else 0.0
    for level in np.linspace(0, top, 9)[1:-1]:
        fig.segments(contour_segments(af.grid, af.tau, level), "purple", 0.8, title=f"tau={fmt(level)}")
    fig.marker(x0)
    fig.save(out / "arrival.svg")
    log(f"reached {int(np.isfinite(af.tau).sum())} of {af.tau.size} cells, latest arrival {top:.9g}")
    return EXIT_OK, {}


def _navigate(scn, p, out, log):
    x0 = _need(p, "from_", "--from")
    y0 = _need(p, "to", "--to")
    kw = dict(grid=p["grid"] or 256, T_max=p.get("tmax"), step=p.get("step"))
    sol = min_time_path(scn, x0, y0, **kw) if p["kind"] == "min" else max_time_path(scn, x0, y0, **kw)
    sol.to_json(out / "navigate.json")
    sol.to_csv(out / "navigate.csv")
    fig = SvgFigure(scn.chart)
    if len(sol.path):
        fig.polyline(sol.path, "crimson", 1.5, title=sol.kind.value)
    fig.marker(x0)
    fig.marker(y0, "blue")
    fig.save(out / "navigate.svg")
    s = sol.summary()
    log(json.dumps(s, sort_keys=True))
    if p.get("require_reachable") and sol.verdict is not Verdict.REACHABLE:
        return EXIT_UNREACHABLE, s
    return EXIT_OK, s


def _cauchy(scn, p, out, log):
    grid = GridSpec(scn.chart, p["grid"] or 128)
    A = _region(p["region"], grid)
    T = p.get("tmax") or 1.0
    cd = cauchy_development(scn, A, grid, p["dt"], T)
    for name, future in (("H_plus", True), ("H_minus", False)):
        rows = cd.horizon_samples(future)
        with open(out / f"{name}.csv", "w") as fh:
            fh.write("t,x,y\n")
            for t, x, y in rows:
                fh.write(f"{t!r},{x!r},{y!r}\n")
    fig = SvgFigure(scn.chart)
    K = len(cd.D_plus) - 1
    for k in sorted(set(int(round(K * f)) for f in (0.0, 0.25, 0.5, 0.75, 1.0))):
        fig.segments(contour_segments(grid, np.where(cd.D_plus[k], -1.0, 1.0)), "teal", 1.0,
                     title=f"H+ t={fmt(cd.times[k])}")
    fig.save(out / "cauchy.svg")
    write_pgm(out / "D_plus_final.pgm", cd.D_plus[-1])
    last = max((k for k, m in enumerate(cd.D_plus) if m.any()), default=0)
    log(f"D+ nonempty up to t = {cd.times[last]:.9g} (of {T:.9g}), {K} slabs of {cd.dt:.6g}")
    return EXIT_OK, {"dt": cd.dt}


def _khorizon(scn, p, out, log):
    grid = GridSpec(scn.chart, p["grid"] or 256)
    A = _region(p["region"], grid)
    kh = k_horizon(scn, A, grid, p.get("tmax"))
    X, Y = grid.mesh()
    with open(out / "khorizon.csv", "w") as fh:
        fh.write("x,y\n")
        for x, y in zip(X[kh.horizon], Y[kh.horizon]):
            fh.write(f"{x!r},{y!r}\n")
    fig = SvgFigure(scn.chart)
    fig.segments(contour_segments(grid, np.where(kh.reach, -1.0, 1.0)), "orange", 1.5, title="horizon")
    fig.save(out / "khorizon.svg")
    write_pgm(out / "khorizon.pgm", kh.reach)
    log(f"{int(kh.horizon.sum())} horizon cells, converged {kh.converged}")
    return EXIT_OK, {"converged": kh.converged}


def _check(scn, p, out, log):
    results = run_checks(scn, seed=p.get("seed", 0), **({"step": p["step"]} if p.get("step") else {}))
    width = max(len(r.name) for r in results)
    lines = []
    for r in results:
        line = f"{r.name:{width}s}  {'PASS' if r.passed else 'FAIL'}  {r.detail}"
        lines.append(line)
        log(line)
    (out / "check.txt").write_text("\n".join(lines) + "\n")
    ok = all(r.passed for r in results)
    return (EXIT_OK if ok else EXIT_CHECK_FAILED), {r.name: r.passed for r in results}


_DISPATCH = {
    "classify": _classify, "metric": _metric, "geodesic": _geodesic, "reach": _reach, "arrival": _arrival,
    "navigate": _navigate, "cauchy": _cauchy, "khorizon": _khorizon, "check": _check,
}


# --- driver -----------------------------------------------------------------------------------

def _manifest(spec: CommandSpec, status: int, result: dict) -> dict:
    return {
        "subcommand": spec.subcommand,
        "argv": spec.argv,
        "scenario_path": spec.scenario_path,
        "scenario": spec.document,
        "params": {k: (list(v) if isinstance(v, tuple) else v) for k, v in sorted(spec.params.items())},
        "exit_status": status,
        "result": result,
        "tolerances": {"lambda_tol": LAMBDA_TOL, "h_tol": H_TOL, "C_tol_rel": C_TOL_REL,
                       "null_abort": NULL_ABORT, "null_growth": NULL_GROWTH, "n_controls": N_CONTROLS},
        "versions": {"windnav": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
                     "python": platform.python_version()},
    }


def _err(log, msg: str) -> None:
    if log is print:
        print(msg, file=sys.stderr)
    else:
        log(msg)


def run(spec: CommandSpec, log=print) -> int:
    """Execute one command; artifacts and ``manifest.json`` go to ``spec.out``."""
    spec.out.mkdir(parents=True, exist_ok=True)
    status, result = EXIT_OK, {}
    try:
        if spec.document is None:
            spec.document = json.loads(Path(spec.scenario_path).read_text())
        scn = load_scenario(spec.document)
        status, result = _DISPATCH[spec.subcommand](scn, spec.params, spec.out, log)
    except (ScenarioError, OutOfChartError, UsageError, CFLViolation, EmptyRegion, NoMaximizer,
            MetricDomainError, OSError, json.JSONDecodeError) as exc:
        _err(log, f"error: {exc}")
        status, result = EXIT_VALIDATION, {"error": str(exc)}
    except GeodesicAbort as exc:
        _err(log, f"numerical abort: {exc}")
        status, result = EXIT_ABORT, {"error": str(exc)}
    _write_json(spec.out / "manifest.json", _manifest(spec, status, _jsonable(result)))
    return status


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        return _num(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _replay(manifest_path: str, out: str) -> int:
    m = json.loads(Path(manifest_path).read_text())
    args = build_parser().parse_args(m["argv"])
    spec = _spec_from_args(args, m["argv"])
    spec.out = Path(out)
    spec.document = m["scenario"]
    return run(spec)


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    if args.subcommand == "replay":
        return _replay(args.manifest, args.out)
    return run(_spec_from_args(args, argv))


if __name__ == "__main__":
    sys.exit(main())
