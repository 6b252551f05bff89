"""Acceptance suite: one test per criterion, each printing a verdict line.

Run with `pytest tests/test_acceptance.py -v`; the per-criterion lines
appear in the terminal summary.  Tolerances are fixed here, not tuned
at runtime.
"""

import time

import numpy as np
import pytest

import conftest
from conftest import random_spd, standing_wave
from maxwellpec import charts, solver, structure
from maxwellpec.compat import correct_initial_data, kernel_solve, s_mp
from maxwellpec.divergence import (MuTilde, RecoveryOperators,
                                   cancellation_sweep)
from maxwellpec.fields import as_field
from maxwellpec.grid import Grid
from maxwellpec.materials import MaterialLaw, assemble_coefficients
from maxwellpec.scenario import scenario_from_dict
from maxwellpec.structure import levi_civita
from maxwellpec.verify import (verify_hm_estimate, verify_l2_estimate,
                               verify_tangential_estimate)

S = structure.build_structure_matrices()
ZERO_F = as_field(["0"] * 6, (6,))
U0_SW = as_field(["0", "0", "0", "-cos(2*pi*x3)", "0", "0"], (6,))


def _verdict(num, ok, detail):
    line = f"criterion {num:02d} {'PASS' if ok else 'FAIL'}  {detail}"
    conftest.ACCEPTANCE_LINES.append(line)
    assert ok, line


def _vacuum(grid):
    return assemble_coefficients(MaterialLaw.vacuum(), grid, [0.0])


def test_criterion_01_structural_algebra():
    start = time.perf_counter()
    r_factor = np.abs(S.b - S.m @ S.a3).max()
    r_sym = np.abs(S.a3 - 0.5 * (S.c.T @ S.b + S.b.T @ S.c)).max()
    eigs = np.linalg.eigvalsh(S.a3)
    signature_ok = (np.sum(eigs > 1e-12) == 2 and np.sum(eigs < -1e-12) == 2
                    and np.sum(np.abs(eigs) <= 1e-12) == 2)
    kernel_ok = (np.abs(S.a3 @ np.eye(6)[2]).max() == 0.0
                 and np.abs(S.a3 @ np.eye(6)[5]).max() == 0.0)
    elapsed = time.perf_counter() - start
    ok = (r_factor <= 1e-14 and r_sym <= 1e-14 and signature_ok
          and kernel_ok and elapsed < 1.0)
    _verdict(1, ok, f"factorizations ({r_factor:.1e}, {r_sym:.1e}), "
                    f"signature (2,2,2), kernel span(e3,e6), "
                    f"{elapsed:.3f} s")


def test_criterion_02_cancellation_identity():
    start = time.perf_counter()
    grid = Grid(1.0, 1.0, 1.0, 4, 4, 5)
    worst = cancellation_sweep(trials=100, seed=7, grid=grid, degree=4)

    # brute-force Levi-Civita loop cross-check on a subsample
    rng = np.random.default_rng(7)
    cross = 0.0
    for _ in range(10):
        mu = rng.normal(size=(3, 3))
        hess = rng.normal(size=(3, 3, 3))
        hess = hess + np.transpose(hess, (0, 2, 1))
        total = 0.0
        for j in range(3):
            for k in range(3):
                for l in range(3):
                    for n in range(3):
                        for p in range(3):
                            total += levi_civita(n, l, p) * mu[l, k] \
                                * mu[n, j] * hess[p, k, j]
        cross = max(cross, abs(total))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-13 and cross <= 1e-13 and elapsed < 10.0
    _verdict(2, ok, f"sweep max {worst:.2e}, loop oracle max {cross:.2e}, "
                    f"{elapsed:.2f} s")


def test_criterion_03_elimination_identity():
    rng = np.random.default_rng(13)
    worst = 0.0
    for _ in range(100):
        a0 = random_spd(rng, floor=0.5)
        mu = rng.normal(size=(3, 3))
        mu[:, 2] = (0.0, 0.0, 1.0)
        worst = max(worst, RecoveryOperators(a0, MuTilde(mu))
                    .identity_residual())
    _verdict(3, worst <= 1e-12, f"max |G2 G1 stack - selector| = {worst:.2e}")


def test_criterion_04_kernel_inversion():
    rng = np.random.default_rng(17)
    worst = 0.0
    amp_max = 0.0
    for p in (1, 2, 3):
        for _ in range(100):
            a0 = random_spd(rng, floor=0.5)
            v0 = rng.normal(size=6)
            vp = kernel_solve(a0, v0, p, eta=0.5)
            lhs = S.a3 @ np.linalg.matrix_power(
                -np.linalg.solve(a0, S.a3), p) @ vp
            worst = max(worst, np.abs(lhs - S.a3 @ v0).max())
            amp_max = max(amp_max, np.linalg.norm(vp) / np.linalg.norm(v0))
    ok = worst <= 1e-10 and amp_max < 1e4
    _verdict(4, ok, f"identity residual {worst:.2e}, "
                    f"max amplification {amp_max:.1f}")


def test_criterion_05_recursion_matches_dynamics():
    start = time.perf_counter()

    def derivative_gap(nx, nz):
        grid = Grid(1.0, 1.0, 1.0, nx, 4, nz)
        co = _vacuum(grid)
        dt = solver.cfl_timestep(co, 0.4)
        rec = solver.run(co, ZERO_F, None, U0_SW, 0.0, 3 * dt, dt=dt,
                         stride=1)
        u_t = (-3 * rec.snapshots[0] + 4 * rec.snapshots[1]
               - rec.snapshots[2]) / (2 * rec.dt)
        s11 = s_mp(co, ZERO_F, U0_SW, 1, mode="analytic")
        return grid.norm_l2(u_t - s11)

    e_h = derivative_gap(64, 65)
    e_h2 = derivative_gap(128, 129)
    ratio = e_h / e_h2
    elapsed = time.perf_counter() - start
    ok = 3.0 <= ratio <= 5.0 and elapsed < 60.0
    _verdict(5, ok, f"errors {e_h:.3e} -> {e_h2:.3e}, ratio {ratio:.2f}, "
                    f"{elapsed:.1f} s")


def test_criterion_06_data_correction():
    grid = Grid(1.0, 1.0, 1.0, 24, 4, 25)
    vac = _vacuum(grid)
    k = 3 * np.pi / 2
    g_wall = as_field([f"sin({k}*t)", "0"], (2,))
    u0 = as_field(["0", "0", "0", f"sin({k}*x3)", "0", "0"], (6,))
    norms = []
    residual_worst = 0.0
    for delta in (1e-3, 1e-4, 1e-5):
        law = MaterialLaw(f"1 + {delta}*sin(x1)", f"1 + {delta}*sin(x1)")
        pert = assemble_coefficients(law, grid, [0.0])
        _, h, rep = correct_initial_data(vac, pert, ZERO_F, g_wall, u0, 2)
        residual_worst = max(residual_worst, max(rep.residuals))
        norms.append(grid.norm_hm(h, 2))
    r1 = norms[0] / norms[1]
    r2 = norms[1] / norms[2]
    ok = residual_worst <= 1e-8 and 8.0 <= r1 <= 12.0 and 8.0 <= r2 <= 12.0
    _verdict(6, ok, f"corrected residual {residual_worst:.2e}, "
                    f"||h||_H2 decade ratios {r1:.2f}, {r2:.2f}")


def test_criterion_07_solver_convergence_and_drift():
    def sw_error(n):
        grid = Grid(1.0, 1.0, 1.0, n, n, n + 1)
        co = _vacuum(grid)
        rec = solver.run(co, ZERO_F, None, U0_SW, 0.0, 1.0,
                         record_snapshots=False)
        return grid.norm_l2(rec.final.u - standing_wave(grid, rec.final.t))

    e32, e64 = sw_error(32), sw_error(64)
    ratio = e32 / e64

    grid = Grid(1.0, 1.0, 1.0, 48, 4, 9)
    co = _vacuum(grid)
    u0 = as_field(["0", "0", "sin(2*pi*x1)", "0", "0", "0"], (6,))
    dt = solver.cfl_timestep(co, 0.4)
    rec = solver.run(co, ZERO_F, None, u0, 0.0, 1000 * dt, dt=dt, stride=1,
                     record_snapshots=False)
    drift = float(np.abs(rec.energy - rec.energy[0]).max() / rec.energy[0])

    ok = 3.7 <= ratio <= 4.3 and drift <= 1e-6
    _verdict(7, ok, f"L2 ratio 32^3 -> 64^3 = {ratio:.2f}, "
                    f"conservative drift {drift:.2e} over 10^3 steps")


def test_criterion_08_divergence_propagation():
    doc = {
        "schema": 1,
        "grid": {"nx": 12, "ny": 12, "nz": 13},
        "time": {"horizon": 1.0, "stride": 2},
        "material": {"epsilon": "1", "mu": "1"},
        "data": {"u0": [
            "2*pi*sin(2*pi*x3)*sin(2*pi*x1)*cos(2*pi*x2)",
            "-2*pi*sin(2*pi*x3)*cos(2*pi*x1)*sin(2*pi*x2)",
            "0",
            "-2*pi*cos(2*pi*x3)*cos(2*pi*x1)*sin(2*pi*x2)",
            "2*pi*cos(2*pi*x3)*sin(2*pi*x1)*cos(2*pi*x2)",
            "0"]},
    }
    scn = scenario_from_dict(doc, "pulse")
    consts_e = []
    r2_worst = 0.0
    s = scn
    for _ in range(3):
        co = s.coefficients()
        rec = solver.run(co, s.f, None, s.u0, 0.0, 1.0, cfl=s.cfl,
                         stride=s.stride, record_snapshots=False)
        consts_e.append(rec.div_residuals[:, 0].max() / s.grid.h_max ** 2)
        r2_worst = max(r2_worst, rec.div_residuals[:, 1].max())
        s = s.refine()
    stable = all(b <= 1.25 * a for a, b in zip(consts_e, consts_e[1:]))
    ok = stable and r2_worst <= 1e-12
    _verdict(8, ok, "electric C = "
             + ", ".join(f"{c:.1f}" for c in consts_e)
             + f" (non-increasing), magnetic residual {r2_worst:.1e}")


def test_criterion_09_transform():
    grid = Grid(1.0, 1.0, 1.0, 8, 8, 9)
    coeffs = assemble_coefficients(
        MaterialLaw("1 + 0.3*exp(-x1**2 - x2**2)", "2"), grid, [0.0])
    rng = np.random.default_rng(23)
    worst_a3 = 0.0
    worst_rt = 0.0
    for chart in (charts.rotation_chart(0.7), charts.tilt_chart(0.5, 0.2),
                  charts.vertical_stretch_chart(0.25)):
        tr = charts.transport_operator(chart, coeffs)
        ct, nrm, _ = charts.normalize(tr)
        worst_a3 = max(worst_a3, nrm.a3_deviation)
        v = rng.normal(size=(6,) + grid.shape)
        u = charts.pullback_solution(v, nrm, grid)
        worst_rt = max(worst_rt, np.abs(
            charts.pushforward_data(u, nrm, grid) - v).max())
    ok = worst_a3 <= 1e-12 and worst_rt <= 1e-13
    _verdict(9, ok, f"A3 deviation {worst_a3:.2e}, "
                    f"round trip {worst_rt:.2e} over 3 charts")


def test_criterion_10_estimate_campaigns():
    k = 3 * np.pi / 2
    doc = {
        "schema": 1,
        "grid": {"nx": 24, "ny": 4, "nz": 25},
        "time": {"horizon": 1.0, "horizon_max": 2.0, "stride": 4},
        "material": {"epsilon": "1", "mu": "1"},
        "data": {"g": [f"sin({k}*t)", "0"],
                 "u0": ["0", "0", "0", f"sin({k}*x3)", "0", "0"]},
        "verify": {"order": 2, "gammas": [2.0, 4.0, 8.0]},
    }
    scn = scenario_from_dict(doc, "wall_driven")
    details = []
    ok = True
    for name, report in (
            ("l2", verify_l2_estimate(scn, levels=2)),
            ("tangential m=1", verify_tangential_estimate(scn, 1, levels=2)),
            ("tangential m=2", verify_tangential_estimate(scn, 2, levels=2)),
            ("hm m=1", verify_hm_estimate(scn, 1, levels=2)),
            ("hm m=2", verify_hm_estimate(scn, 2, levels=2))):
        ok = ok and report.passed and report.spread < 2.0 \
            and report.runtime_seconds < 300.0
        details.append(f"{name}: spread {report.spread:.2f} "
                       f"({report.runtime_seconds:.0f} s)")
    _verdict(10, ok, "; ".join(details))
