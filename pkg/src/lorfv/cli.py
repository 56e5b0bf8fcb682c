"""Command line interface.

Exit codes: 0 clean, 1 invariant or admissibility violation, 2 usage,
configuration or parse error.
"""
from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path
from typing import List, Optional

import numpy as np

from .config import dump_config, load_config
from .errors import (ConfigError, InconsistentFamily, LorfvError, MeshParseError,
                     MeshStructureError)

EXIT_OK, EXIT_VIOLATION, EXIT_USAGE = 0, 1, 2

SOLUTION_COLUMNS = ["n", "element", "face", "t", "t_n", "x", "u"]
SUMMARY_COLUMNS = ["n", "t_n", "total_mass", "drift", "l1_norm", "max_abs", "envelope",
                   "alpha_min", "alpha_sum_max", "reconstruction_error",
                   "kruzkov_residual", "quadratic_residual", "dissipation"]
ENTROPY_COLUMNS = ["n", "t_n", "max_residual", "dissipation", "dissipation_cumulative",
                   "max_abs", "envelope", "envelope_margin"]
CONVERGENCE_COLUMNS = ["nx", "h", "tau", "h2_over_tau", "l1_error", "order", "t_final"]


def fmt(v) -> str:
    """Round-trip float formatting; integers stay integers, missing is empty."""
    if v is None:
        return ""
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    if np.isnan(v):
        return ""
    return format(v, ".17g")


def write_csv(path: Path, columns, rows) -> int:
    count = 0
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([fmt(r[c]) for c in columns])
            count += 1
    return count


def solution_rows(traj):
    m = traj.mesh
    F = m.faces
    for s in traj.states:
        for k, fc, u in zip(s.elements, s.faces, s.u):
            yield {"n": s.n, "element": int(m.element_ids[k]), "face": int(F.ids[fc]),
                   "t": F.centroid[fc, 0], "t_n": s.t_n, "x": F.centroid[fc, 1], "u": u}


def summary_rows(traj, diag):
    m = traj.mesh
    N = len(traj.records)
    step = lambda a, n: a[n] if n < N else None
    for n, s in enumerate(traj.states):
        yield {"n": n, "t_n": s.t_n, "total_mass": diag.total_mass[n], "drift": diag.drift[n],
               "l1_norm": float((m.faces.measure[s.faces] * np.abs(s.u)).sum()),
               "max_abs": diag.max_abs[n], "envelope": diag.envelope[n],
               "alpha_min": step(diag.alpha_min, n), "alpha_sum_max": step(diag.alpha_sum_max, n),
               "reconstruction_error": step(diag.reconstruction_error, n),
               "kruzkov_residual": step(diag.kruzkov_residual, n),
               "quadratic_residual": step(diag.quadratic_residual, n),
               "dissipation": step(diag.dissipation, n)}


def _out_dir(args, cfg, default: str) -> Path:
    out = Path(args.out_dir or (cfg.out if cfg is not None and cfg.out else default))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _say(msg: str) -> None:
    print(msg, flush=True)


def _err(msg: str) -> None:
    print(f"lorfv: {msg}", file=sys.stderr, flush=True)


# -- subcommands -------------------------------------------------------------

def cmd_run(args) -> int:
    from .meshio import write_mesh
    from .scheme import run

    cfg = load_config(args.config)
    traj, diag = run(cfg, entropy=not args.no_entropy)
    out = _out_dir(args, cfg, "lorfv-run")
    nrows = write_csv(out / "solution.csv", SOLUTION_COLUMNS, solution_rows(traj))
    write_csv(out / "summary.csv", SUMMARY_COLUMNS, summary_rows(traj, diag))
    (out / "config.cfg").write_text(dump_config(cfg))
    if args.save_mesh:
        write_mesh(traj.mesh, out / "mesh.lorfv-mesh")
    m = traj.mesh
    _say(f"run: {len(traj.records)} steps on {m.n_elements} elements, t_N = {traj.t_N:.6g}")
    _say(f"  max CFL ratio          {diag.cfl_max:.4f}")
    _say(f"  max conservation drift {diag.drift.max():.3e}")
    _say(f"  max |u|                {diag.max_abs.max():.6g} (envelope {diag.envelope.min():.6g})")
    if np.isfinite(diag.kruzkov_residual).any():
        _say(f"  max Kruzkov residual   {np.nanmax(diag.kruzkov_residual):.3e}")
        _say(f"  max quadratic residual {np.nanmax(diag.quadratic_residual):.3e}")
    _say(f"  entropy dissipation    {diag.dissipation_total:.6g}")
    _say(f"  wrote {nrows} solution rows to {out}")
    bad = diag.violations()
    for v in bad:
        _err(f"violation: {v}")
    return EXIT_VIOLATION if bad else EXIT_OK


def cmd_check_mesh(args) -> int:
    from .admissibility import cartesian_deviation, cfl_report
    from .geometry import gauss_legendre, make_flux, make_metric
    from .meshio import assemble, causal_mismatches, parse_mesh

    try:
        text = Path(args.mesh).read_text()
    except OSError as exc:
        raise MeshParseError(f"cannot read mesh {args.mesh}: {exc.strerror}") from None
    mf = parse_mesh(text, args.mesh)
    metric = None
    if args.metric is not None or args.period is not None:
        L = args.period if args.period is not None else (mf.period or 1.0)
        metric = make_metric(args.metric or mf.metric or "minkowski", L=L, **mf.metric_params)
    mesh = assemble(mf, metric, gauss_legendre(args.quad_order))
    f = make_flux(args.flux, mesh.metric)
    failures = []
    mism = causal_mismatches(mesh)
    for c in mism[:10]:
        failures.append(f"face {c.face_id} declared {c.declared} but is {c.computed}")
    if not mesh.check_normals():
        failures.append("unit normals failed the orientation check")
    u_range = tuple(args.u_range) if args.u_range else None
    cfl = cfl_report(mesh, f, u_range)
    if not cfl.ok:
        failures.append(f"CFL ratio {cfl.max_ratio:.4f} > {cfl.limit:g} at element "
                        f"{int(mesh.element_ids[cfl.worst_element])}")
    dev = cartesian_deviation(mesh, eta_threshold=args.eta_threshold)
    if not dev.ok:
        failures.append(f"Cartesian deviation eta = {dev.eta:.4g} > {dev.threshold:g}"
                        if dev.eta > dev.threshold else
                        "flatness or normal smoothness bound exceeded")
    _say(f"check-mesh: {mesh.n_elements} elements in {mesh.n_slices} slices, "
         f"metric {mesh.metric.name}, h = {mesh.h:.4g}, tau = {mesh.tau:.4g}")
    _say(f"  causal classes         {'ok' if not mism else f'{len(mism)} mismatches'}")
    _say(f"  max CFL ratio ({args.flux}) {cfl.max_ratio:.4f}")
    _say(f"  deviation sum          {np.abs(dev.signed_sum).max() if dev.signed_sum.size else 0.0:.3e}")
    _say(f"  eta (aggregate/EX3/EX4) {dev.eta_aggregate:.4g} / {dev.eta_ex3:.4g} / {dev.eta_ex4:.4g}")
    _say(f"  flatness, smoothness   {dev.flatness_residual:.3g}, {dev.smoothness_proxy:.3g}")
    for msg in failures:
        _err(f"violation: {msg}")
    _say("  result                 " + ("FAIL" if failures else "pass"))
    return EXIT_VIOLATION if failures else EXIT_OK


def cmd_convergence(args) -> int:
    from .harness import convergence_study, family_from, solution_for

    cfg = load_config(args.config)
    nxs = [int(v) for v in args.nx.split(",")] if args.nx else [32, 64, 128, 256]
    try:
        sol = solution_for(cfg)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    tab = convergence_study(family_from(cfg, nxs), sol)
    out = _out_dir(args, cfg, "lorfv-convergence")
    write_csv(out / "convergence.csv", CONVERGENCE_COLUMNS, tab.rows())
    _say(f"convergence: {sol.name}, {len(nxs)} resolutions")
    _say(f"  {'nx':>5} {'h':>10} {'h^2/tau':>10} {'L1 error':>12} {'order':>7}")
    for r in tab.rows():
        order = "" if np.isnan(r["order"]) else f"{r['order']:.3f}"
        _say(f"  {r['nx']:>5} {r['h']:>10.4g} {r['h2_over_tau']:>10.4g} {r['l1_error']:>12.4e} {order:>7}")
    ok = tab.converging(args.min_order)
    if not tab.strictly_decreasing:
        _err("violation: L1 errors do not strictly decrease")
    elif not ok:
        _err(f"violation: finest-pair order {tab.finest_order:.3f} < {args.min_order}")
    return EXIT_OK if ok else EXIT_VIOLATION


def _read_solution_last(path: Path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        return None
    n = max(int(r["n"]) for r in rows)
    return np.array([float(r["u"]) for r in rows if int(r["n"]) == n])


def cmd_entropy_report(args) -> int:
    from .entropy import dissipation_terms, entropy_report, linfty_envelope
    from .scheme import run

    src = Path(args.run_output)
    cfg_path = src / "config.cfg" if src.is_dir() else src
    cfg = load_config(cfg_path)
    traj, _ = run(cfg, entropy=False)
    failures = []
    sol_csv = src / "solution.csv" if src.is_dir() else None
    if sol_csv is not None and sol_csv.exists():
        last = _read_solution_last(sol_csv)
        if last is None or last.shape != traj.states[-1].u.shape or \
                np.abs(last - traj.states[-1].u).max() > 1e-12:
            failures.append("stored solution.csv does not match its configuration")
    lambdas = np.array(args.lambda_grid, dtype=float) if args.lambda_grid else None
    rep = entropy_report(traj, kind=args.entropy, lambdas=lambdas, u_range=cfg.u_range,
                         tol=cfg.entropy_tol)
    env = linfty_envelope(traj, u_range=cfg.u_range)
    diss = np.array([dissipation_terms(r).sum() for r in traj.records])
    cum = np.concatenate([[0.0], np.cumsum(diss)])
    N = len(traj.records)

    def rows():
        for n, s in enumerate(traj.states):
            yield {"n": n, "t_n": s.t_n,
                   "max_residual": rep.step_max_residual[n] if n < N else None,
                   "dissipation": diss[n] if n < N else None,
                   "dissipation_cumulative": cum[n], "max_abs": env.max_abs[n],
                   "envelope": env.bound[n], "envelope_margin": env.margin[n]}

    out = Path(args.out_dir) if args.out_dir else (src if src.is_dir() else src.parent)
    out.mkdir(parents=True, exist_ok=True)
    name = f"entropy_{args.entropy}.csv"
    write_csv(out / name, ENTROPY_COLUMNS, rows())
    _say(f"entropy-report ({args.entropy}): {N} steps")
    if rep.lambdas.size:
        _say(f"  lambda grid            {', '.join(f'{l:.4g}' for l in rep.lambdas)}")
    _say(f"  max cell residual      {rep.max_residual:.3e} (tolerance {rep.tol:g})")
    _say(f"  dissipation total      {rep.dissipation_total:.6g}, per unit time {rep.dissipation_rate:.6g}")
    _say(f"  min envelope margin    {env.margin.min():.3e}")
    _say(f"  wrote {out / name}")
    if not rep.ok:
        failures.append(f"entropy residual {rep.max_residual:.3e} exceeds {rep.tol:g}")
    if not env.ok:
        failures.append("max|u| leaves the L-infinity envelope")
    for msg in failures:
        _err(f"violation: {msg}")
    return EXIT_VIOLATION if failures else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lorfv", description="Finite volume runs on 1+1 "
                                "Lorentzian spacetimes with runtime stability checks.")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="march a configured run and write CSV output")
    r.add_argument("config")
    r.add_argument("--out-dir")
    r.add_argument("--no-entropy", action="store_true", help="skip the entropy residual sweep")
    r.add_argument("--save-mesh", action="store_true", help="also write the mesh file")
    r.set_defaults(func=cmd_run)

    c = sub.add_parser("check-mesh", help="validate a mesh file")
    c.add_argument("mesh")
    c.add_argument("--metric", help="override the metric named in the file")
    c.add_argument("--period", type=float)
    c.add_argument("--flux", default="burgers", help="flux used for the CFL ratio")
    c.add_argument("--u-range", nargs=2, type=float, metavar=("LO", "HI"))
    c.add_argument("--eta-threshold", type=float, default=0.5)
    c.add_argument("--quad-order", type=int, default=5)
    c.add_argument("--out-dir", help="accepted for interface symmetry; nothing is written")
    c.set_defaults(func=cmd_check_mesh)

    v = sub.add_parser("convergence", help="L1 errors under Nx doubling")
    v.add_argument("config")
    v.add_argument("--nx", help="comma separated resolutions (default 32,64,128,256)")
    v.add_argument("--min-order", type=float, default=0.5)
    v.add_argument("--out-dir")
    v.set_defaults(func=cmd_convergence)

    e = sub.add_parser("entropy-report", help="entropy residuals of a finished run")
    e.add_argument("run_output", help="output directory of `run`, or a config file")
    e.add_argument("--lambda-grid", nargs="+", type=float)
    e.add_argument("--entropy", choices=["kruzkov", "quadratic"], default="kruzkov")
    e.add_argument("--out-dir")
    e.set_defaults(func=cmd_entropy_report)
    return p


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        return args.func(args)
    except (ConfigError, MeshParseError) as exc:
        _err(str(exc))
        return EXIT_USAGE
    except (InconsistentFamily, MeshStructureError) as exc:
        _err(f"violation: {exc}")
        return EXIT_VIOLATION
    except LorfvError as exc:
        _err(f"violation: {type(exc).__name__}: {exc}")
        return EXIT_VIOLATION


if __name__ == "__main__":
    sys.exit(main())
