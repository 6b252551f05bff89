"""Command-line harness: scenario runs, checks, and verification campaigns.

Subcommands
    simulate             evolve a scenario, write series + snapshots
    check-compat         compatibility residuals of the scenario data
    correct-data         repair compatibility after a coefficient perturbation
    verify-energy        estimate campaigns (base + order-m + tangential)
    verify-cancellation  structural trace-cancellation sweep
    transform            chart transport + wall normalization checks
    norms                data norms of the scenario

Exit status: 0 pass, 2 verification failure, 1 runtime error, 64 usage.
Reports are JSON with sorted keys; apart from the timestamp field they
are byte-reproducible for identical inputs and seed.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

import numpy as np

from . import charts, solver, verify
from .compat import check_compatibility, correct_initial_data
from .divergence import cancellation_sweep, decompose_mu
from .grid import Grid
from .norms import NormReport, em_norm, gm_norm, ha_norm
from .fields import on_grid
from .scenario import Scenario, ScenarioError, load_scenario

__all__ = ["run_cli", "main"]

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_VERIFY_FAIL = 2
EXIT_USAGE = 64


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _write_json(payload: dict, out_dir: str, name: str) -> str:
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, name)
    with open(path, "w") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2)
        fh.write("\n")
    return path


def _report_header(scn: Scenario | None, args) -> dict:
    head = {"timestamp": time.strftime("%Y-%m-%dT%H:%M:%S"),
            "seed": getattr(args, "seed", 0)}
    if scn is not None:
        head["scenario"] = scn.name
        head["grid"] = {"lx": scn.grid.lx, "ly": scn.grid.ly,
                        "lz": scn.grid.lz, "nx": scn.grid.nx,
                        "ny": scn.grid.ny, "nz": scn.grid.nz}
    return head


def _write_series_csv(rec: solver.RunRecord, out_dir: str) -> str:
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, "series.csv")
    cols = rec.series_columns()
    header = "t,energy,div_residual_e,div_residual_h,wall_residual,boundary_flux"
    np.savetxt(path, cols, delimiter=",", header=header, comments="",
               fmt="%.17g")
    return path


def _write_snapshot(u: np.ndarray, t: float, grid: Grid, out_dir: str,
                    tag: str) -> None:
    os.makedirs(out_dir, exist_ok=True)
    raw = os.path.join(out_dir, f"{tag}.f64")
    np.ascontiguousarray(u, dtype="<f8").tofile(raw)
    sidecar = {
        "file": os.path.basename(raw),
        "dtype": "float64",
        "byte_order": "little",
        "order": "C",
        "shape": list(u.shape),
        "components": ["E1", "E2", "E3", "H1", "H2", "H3"][:u.shape[0]],
        "time": t,
        "grid": {"lx": grid.lx, "ly": grid.ly, "lz": grid.lz,
                 "nx": grid.nx, "ny": grid.ny, "nz": grid.nz},
    }
    with open(os.path.join(out_dir, f"{tag}.json"), "w") as fh:
        json.dump(sidecar, fh, sort_keys=True, indent=2)
        fh.write("\n")


def _load_scenario_refined(args) -> Scenario:
    scn = load_scenario(args.scenario)
    for _ in range(getattr(args, "refine", 0) or 0):
        scn = scn.refine()
    return scn


def _cmd_simulate(args) -> int:
    scn = _load_scenario_refined(args)
    coeffs = scn.coefficients()
    rec = solver.run(coeffs, scn.f, scn.g, scn.u0, scn.t0,
                     scn.t0 + scn.horizon, cfl=scn.cfl, stride=scn.stride,
                     sigma_desc=scn.law.sigma,
                     record_snapshots=not args.no_snapshots)
    _write_series_csv(rec, args.out)
    if not args.no_snapshots:
        for idx, (t, u) in enumerate(zip(rec.snapshot_times, rec.snapshots)):
            _write_snapshot(u, float(t), scn.grid, args.out,
                            f"snapshot_{idx:04d}")
    payload = _report_header(scn, args)
    payload.update({
        "dt": rec.dt, "steps": rec.steps, "stride": rec.stride,
        "final_time": float(rec.times[-1]),
        "final_energy": float(rec.energy[-1]),
        "energy_drift": float(np.abs(rec.energy - rec.energy[0]).max()
                              / max(rec.energy[0], 1e-300)),
        "max_div_residuals": [float(rec.div_residuals[:, 0].max()),
                              float(rec.div_residuals[:, 1].max())],
        "max_wall_residual": float(rec.wall_residual.max()),
    })
    _write_json(payload, args.out, "simulate_report.json")
    return EXIT_OK


def _cmd_check_compat(args) -> int:
    scn = _load_scenario_refined(args)
    order = args.order if args.order is not None else scn.order
    coeffs = scn.coefficients()
    rep = check_compatibility(coeffs, scn.f, scn.g, scn.u0, order,
                              t0=scn.t0, tol=args.tol or scn.tol)
    payload = _report_header(scn, args)
    payload["compat"] = rep.to_dict()
    _write_json(payload, args.out, "compat_report.json")
    return EXIT_OK if rep.passed else EXIT_VERIFY_FAIL


def _cmd_correct_data(args) -> int:
    scn = _load_scenario_refined(args)
    order = args.order if args.order is not None else scn.order
    coeffs = scn.coefficients()
    from .materials import assemble_coefficients
    perturbed = assemble_coefficients(scn.perturbed_law(), scn.grid,
                                      [scn.t0, scn.t0 + scn.horizon])
    before = check_compatibility(perturbed, scn.f, scn.g, scn.u0, order,
                                 t0=scn.t0, tol=args.tol or scn.tol)
    corrected, h, after = correct_initial_data(
        coeffs, perturbed, scn.f, scn.g, scn.u0, order, t0=scn.t0)
    _write_snapshot(corrected.at(scn.t0, scn.grid), scn.t0, scn.grid,
                    args.out, "corrected_u0")
    payload = _report_header(scn, args)
    payload.update({
        "order": order,
        "residuals_before": [float(r) for r in before.residuals],
        "residuals_after": [float(r) for r in after.residuals],
        "tol": after.tol,
        "correction_l2": float(scn.grid.norm_l2(h)),
        "correction_h2": float(scn.grid.norm_hm(h, 2)),
        "passed": bool(after.passed),
    })
    _write_json(payload, args.out, "correct_data_report.json")
    return EXIT_OK if after.passed else EXIT_VERIFY_FAIL


def _cmd_verify_energy(args) -> int:
    scn = _load_scenario_refined(args)
    order = args.order if args.order is not None else scn.order
    gammas = tuple(args.gamma) if args.gamma else scn.gammas
    levels = (args.levels or 2)
    payload = _report_header(scn, args)
    reports = {}
    try:
        reports["l2"] = verify.verify_l2_estimate(scn, gammas, levels)
        if order >= 1:
            reports["tangential"] = verify.verify_tangential_estimate(
                scn, order, gammas, levels)
            reports["hm"] = verify.verify_hm_estimate(
                scn, order, gammas, levels)
    except verify.CompatibilityFailure as exc:
        payload["compat"] = exc.report.to_dict()
        payload["passed"] = False
        _write_json(payload, args.out, "verify_energy_report.json")
        return EXIT_VERIFY_FAIL
    payload["estimates"] = {k: r.to_dict() for k, r in reports.items()}
    payload["passed"] = all(r.passed for r in reports.values())
    _write_json(payload, args.out, "verify_energy_report.json")
    return EXIT_OK if payload["passed"] else EXIT_VERIFY_FAIL


def _cmd_verify_cancellation(args) -> int:
    grid = Grid(1.0, 1.0, 1.0, max(args.points, 3), max(args.points, 3),
                max(args.points, 4))
    worst = cancellation_sweep(args.trials, args.seed, grid,
                               degree=args.degree)
    payload = _report_header(None, args)
    payload.update({"trials": args.trials, "degree": args.degree,
                    "max_residual": worst, "tol": args.tol or 1e-13,
                    "passed": bool(worst <= (args.tol or 1e-13))})
    _write_json(payload, args.out, "cancellation_report.json")
    return EXIT_OK if payload["passed"] else EXIT_VERIFY_FAIL


def _cmd_transform(args) -> int:
    scn = _load_scenario_refined(args)
    if scn.chart is None:
        raise ScenarioError("scenario has no [chart] section")
    coeffs = scn.coefficients()
    transport = charts.transport_operator(scn.chart, coeffs)
    coeffs_t, nrm, _ = charts.normalize(transport, f=scn.f, u0=scn.u0)
    grid = scn.grid
    a3_dev = nrm.a3_deviation
    # round trip on a deterministic pseudo-random state
    rng = np.random.default_rng(args.seed)
    v = rng.normal(size=(6,) + grid.shape)
    u = charts.pullback_solution(v, nrm, grid)
    rt = float(np.abs(charts.pushforward_data(u, nrm, grid) - v).max())
    mu = decompose_mu(coeffs_t.a1.at(0.0, grid), coeffs_t.a2.at(0.0, grid),
                      coeffs_t.a3.at(0.0, grid))
    payload = _report_header(scn, args)
    payload.update({
        "chart": scn.chart.name,
        "a3_residual": a3_dev,
        "roundtrip_residual": rt,
        "mu_column_normalized": bool(mu.normalized_column()),
        "passed": bool(rt <= 1e-13 and mu.normalized_column()),
    })
    _write_json(payload, args.out, "transform_report.json")
    return EXIT_OK if payload["passed"] else EXIT_VERIFY_FAIL


def _cmd_norms(args) -> int:
    scn = _load_scenario_refined(args)
    grid = scn.grid
    gamma = args.gamma[0] if args.gamma else scn.gammas[0]
    order = args.order if args.order is not None else scn.order
    times = np.linspace(scn.t0, scn.t0 + scn.horizon, 17)
    u0_vals = on_grid(scn.u0.at(scn.t0, grid), (6,), grid.shape)
    report = NormReport(
        gamma=gamma,
        gm=gm_norm(scn.u0, order, gamma, grid, times=times),
        hm=float(grid.norm_hm(u0_vals, order)),
        em=em_norm(scn.g, order, gamma, grid, times=times),
        extra={"order": order,
               "f_ham_gamma": float(ha_norm(scn.f, order, gamma, grid,
                                            times=times))},
    )
    payload = _report_header(scn, args)
    payload["norms"] = report.to_dict()
    _write_json(payload, args.out, "norms_report.json")
    return EXIT_OK


def _build_parser() -> _Parser:
    parser = _Parser(prog="maxwellpec",
                     description="half-space Maxwell verification toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, scenario=True):
        if scenario:
            p.add_argument("scenario", help="scenario TOML file")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--tol", type=float, default=None)
        p.add_argument("--refine", type=int, default=0,
                       help="pre-refine the grid this many times")

    p = sub.add_parser("simulate", help="run a scenario")
    common(p)
    p.add_argument("--no-snapshots", action="store_true")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("check-compat", help="compatibility residuals")
    common(p)
    p.add_argument("--order", type=int, default=None)
    p.set_defaults(func=_cmd_check_compat)

    p = sub.add_parser("correct-data", help="repair compatibility")
    common(p)
    p.add_argument("--order", type=int, default=None)
    p.set_defaults(func=_cmd_correct_data)

    p = sub.add_parser("verify-energy", help="estimate campaigns")
    common(p)
    p.add_argument("--order", type=int, default=None)
    p.add_argument("--gamma", type=float, action="append", default=None)
    p.add_argument("--levels", type=int, default=None,
                   help="number of refinement levels (default 2)")
    p.set_defaults(func=_cmd_verify_energy)

    p = sub.add_parser("verify-cancellation",
                       help="trace cancellation sweep")
    common(p, scenario=False)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--degree", type=int, default=4)
    p.add_argument("--points", type=int, default=4,
                   help="sample grid points per axis")
    p.add_argument("--random-seed", dest="seed", type=int, default=0)
    p.set_defaults(func=_cmd_verify_cancellation)

    p = sub.add_parser("transform", help="chart transport checks")
    common(p)
    p.set_defaults(func=_cmd_transform)

    p = sub.add_parser("norms", help="data norms")
    common(p)
    p.add_argument("--order", type=int, default=None)
    p.add_argument("--gamma", type=float, action="append", default=None)
    p.set_defaults(func=_cmd_norms)

    return parser


def run_cli(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (ScenarioError, FileNotFoundError) as exc:
        print(f"maxwellpec: scenario error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"maxwellpec: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


def main() -> None:
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
