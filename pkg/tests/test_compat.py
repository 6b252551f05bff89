import numpy as np
import pytest
import sympy as sp

from conftest import random_spd
from maxwellpec import structure
from maxwellpec.compat import (CorrectedInitial, SingularMass, check_compatibility,
                               correct_initial_data, kernel_solve, s_mp)
from maxwellpec.fields import SymbolicField, X1, X2, X3, as_field
from maxwellpec.grid import Grid
from maxwellpec.materials import MaterialLaw, assemble_coefficients

S = structure.build_structure_matrices()
GRID = Grid(1.0, 1.0, 1.0, 12, 4, 13)
VAC = assemble_coefficients(MaterialLaw.vacuum(), GRID, [0.0])
ZERO_F = as_field(["0"] * 6, (6,))

# wall-driven vacuum mode, compatible at every order:
#   E2 = cos(k x3) sin(k t), H1 = sin(k x3) cos(k t), k = 3 pi / 2
K = 3 * np.pi / 2
G_WALL = as_field([f"sin({K}*t)", "0"], (2,))
U0_WALL = as_field(["0", "0", "0", f"sin({K}*x3)", "0", "0"], (6,))


def test_s_mp_order_zero_is_identity():
    rng = np.random.default_rng(0)
    u0 = rng.normal(size=(6,) + GRID.shape)
    out = s_mp(VAC, ZERO_F, u0, 0, mode="discrete")
    assert np.array_equal(out, u0)


def test_s_mp_hand_expanded_curl_example():
    # A0 = I, D = 0, f = 0, u0 = (0,...,0,x1):
    # S_{1,1} = (curl H0, -curl E0) = ((0,-1,0), 0)
    u0 = as_field(["0", "0", "0", "0", "0", "x1"], (6,))
    out = s_mp(VAC, ZERO_F, u0, 1, mode="analytic")
    assert np.abs(out[1] + 1.0).max() == 0.0
    assert np.abs(out[[0, 2, 3, 4, 5]]).max() == 0.0


def test_s_mp_constructed_inverse_problem():
    # choose w, build f = A0 w + sum A_j d_j u0 + D u0; then S_{1,1} = w
    u0_sym = sp.ImmutableDenseMatrix(
        [sp.sin(2 * sp.pi * X1), 0, 0, 0, sp.cos(2 * sp.pi * X3), 0])
    w_sym = sp.ImmutableDenseMatrix(
        [1, sp.sin(2 * sp.pi * X1), 0, X3, 0, 2])
    law = MaterialLaw("1 + 0.25*sin(2*pi*x1)", "1", 0.0)
    co = assemble_coefficients(law, GRID, [0.0])
    f_sym = sp.Matrix(co.a0.sym) * w_sym
    for j, a in enumerate((co.a1, co.a2, co.a3)):
        f_sym += sp.Matrix(a.sym) * u0_sym.diff((X1, X2, X3)[j])
    f = SymbolicField(sp.ImmutableDenseMatrix(f_sym), vector=True)
    u0 = SymbolicField(u0_sym, vector=True)
    out = s_mp(co, f, u0, 1, mode="analytic")
    w_vals = SymbolicField(w_sym, vector=True).at(0.0, GRID)
    from maxwellpec.fields import on_grid
    assert np.abs(out - on_grid(w_vals, (6,), GRID.shape)).max() < 1e-12


def test_s_mp_joint_linearity_discrete():
    rng = np.random.default_rng(1)
    co = assemble_coefficients(
        MaterialLaw("1 + 0.3*sin(2*pi*x1)", "1 + 0.1*cos(2*pi*x2)", 0.0),
        GRID, [0.0])
    f = as_field(["sin(2*pi*x1)*cos(t)", "0", "0", "x3", "0", "0"], (6,))
    zero6 = np.zeros((6,) + GRID.shape)
    for _ in range(3):
        u1 = rng.normal(size=(6,) + GRID.shape)
        u2 = rng.normal(size=(6,) + GRID.shape)
        a, b = rng.normal(size=2)
        for p in (1, 2):
            s1 = s_mp(co, ZERO_F, u1, p, mode="discrete")
            s2 = s_mp(co, ZERO_F, u2, p, mode="discrete")
            s12 = s_mp(co, ZERO_F, a * u1 + b * u2, p, mode="discrete")
            scale = max(1.0, np.abs(s12).max())
            assert np.abs(s12 - (a * s1 + b * s2)).max() < 1e-12 * scale
            # joint split into forcing and initial-datum parts
            joint = s_mp(co, f, u1, p, mode="discrete")
            parts = s_mp(co, f, zero6, p, mode="discrete") + s1
            assert np.abs(joint - parts).max() < 1e-12 * scale


def test_s_mp_rejects_depth_above_three():
    with pytest.raises(ValueError):
        s_mp(VAC, ZERO_F, as_field(["0"] * 6, (6,)), 4)


def test_singular_mass_guard():
    law = MaterialLaw("1 - t", "1", 0.0, eta=1e-3)
    co = assemble_coefficients(law, GRID, [0.0])
    u0 = np.zeros((6,) + GRID.shape)
    with pytest.raises(SingularMass):
        s_mp(co, ZERO_F, u0, 1, t0=1.0 - 1e-5, mode="discrete")


def test_check_compatibility_definitional_case():
    # g := trace of B u0, constant in t: order-1 residual is exactly zero
    u0 = as_field(["sin(2*pi*x3)", "cos(2*pi*x1)", "0", "0", "0", "0"], (6,))
    g = as_field(["cos(2*pi*x1)", "-sin(2*pi*x3)"], (2,))
    rep = check_compatibility(VAC, ZERO_F, g, u0, 1)
    assert rep.residuals[0] < 1e-13
    assert rep.passed


def test_check_compatibility_standing_wave_orders():
    u0 = as_field(["0", "0", "0", "-cos(2*pi*x3)", "0", "0"], (6,))
    g = as_field(["0", "0"], (2,))
    for m in (1, 2):
        rep = check_compatibility(VAC, ZERO_F, g, u0, m)
        assert max(rep.residuals) <= 1e-10
        assert rep.mode == "analytic"


def test_check_compatibility_wall_node_perturbation():
    # bumping E1 at one wall node shows up with that node's quadrature weight
    u0 = np.zeros((6,) + GRID.shape)
    u0[0, 3, 2, 0] = 1.0
    g = as_field(["0", "0"], (2,))
    rep = check_compatibility(VAC, ZERO_F, g, u0, 1, mode="discrete")
    expected = np.sqrt(GRID.hx * GRID.hy)
    assert rep.residuals[0] == pytest.approx(expected, rel=1e-12)


def test_report_s_values_start_from_u0():
    u0 = np.zeros((6,) + GRID.shape)
    u0[2] = 0.25
    rep = check_compatibility(VAC, ZERO_F, as_field(["0", "0"], (2,)),
                              u0, 1, mode="discrete")
    assert np.array_equal(rep.s_values[0], u0)


# -- kernel inversion ---------------------------------------------------------


def test_kernel_solve_p0_identity():
    rng = np.random.default_rng(2)
    v0 = rng.normal(size=6)
    assert np.array_equal(kernel_solve(np.eye(6), v0, 0), v0)


def test_kernel_solve_identity_mass():
    rng = np.random.default_rng(3)
    for p in (1, 2, 3):
        for _ in range(10):
            v0 = rng.normal(size=6)
            vp = kernel_solve(np.eye(6), v0, p)
            lhs = S.a3 @ np.linalg.matrix_power(-S.a3, p) @ vp
            assert np.abs(lhs - S.a3 @ v0).max() <= 1e-12


def test_kernel_solve_random_spd_and_amplification():
    rng = np.random.default_rng(4)
    amps = []
    for _ in range(100):
        a0 = random_spd(rng, floor=0.5)
        v0 = rng.normal(size=6)
        vp = kernel_solve(a0, v0, 2, eta=0.5)
        lhs = S.a3 @ np.linalg.matrix_power(
            -np.linalg.solve(a0, S.a3), 2) @ vp
        assert np.abs(lhs - S.a3 @ v0).max() <= 1e-10
        amps.append(np.linalg.norm(vp) / np.linalg.norm(v0))
    assert max(amps) < 1e4


def test_kernel_solve_nodewise_fields():
    rng = np.random.default_rng(5)
    small = Grid(1.0, 1.0, 1.0, 3, 3, 4)
    a0 = np.empty((6, 6) + small.shape)
    for idx in np.ndindex(small.shape):
        a0[(slice(None), slice(None)) + idx] = random_spd(rng, floor=0.6)
    v0 = rng.normal(size=(6,) + small.shape)
    vp = kernel_solve(a0, v0, 3, eta=0.5)
    worst = 0.0
    for idx in np.ndindex(small.shape):
        sl = (slice(None),) + idx
        a = a0[(slice(None), slice(None)) + idx]
        lhs = S.a3 @ np.linalg.matrix_power(-np.linalg.solve(a, S.a3), 3) \
            @ vp[sl]
        worst = max(worst, np.abs(lhs - S.a3 @ v0[sl]).max())
    assert worst <= 1e-10


# -- data correction ----------------------------------------------------------


def _perturbed(delta):
    law = MaterialLaw(f"1 + {delta}*sin(x1)", f"1 + {delta}*sin(x1)", 0.0)
    return assemble_coefficients(law, GRID, [0.0])


def test_correction_zero_defect_is_exact():
    corrected, h, rep = correct_initial_data(
        VAC, VAC, ZERO_F, G_WALL, U0_WALL, 2)
    assert np.abs(h).max() == 0.0
    assert isinstance(corrected, CorrectedInitial)
    assert rep.passed


def test_correction_restores_compatibility_and_scales_linearly():
    norms = []
    for delta in (1e-3, 1e-4, 1e-5):
        pert = _perturbed(delta)
        bad = check_compatibility(pert, ZERO_F, G_WALL, U0_WALL, 2)
        assert not bad.passed
        corrected, h, rep = correct_initial_data(
            VAC, pert, ZERO_F, G_WALL, U0_WALL, 2)
        assert max(rep.residuals) <= 1e-8
        norms.append(GRID.norm_hm(h, 2))
    assert norms[0] / norms[1] == pytest.approx(10.0, rel=0.1)
    assert norms[1] / norms[2] == pytest.approx(10.0, rel=0.1)


def test_collar_supported_perturbation_leaves_traces_tiny():
    # perturbation vanishing near the wall: order-1 defect sees only wall
    # values of the perturbed coefficients, so no correction is needed
    law = MaterialLaw("1 + 0.001*sin(x1)*exp(-1/(0.01+x3**2))*x3**2",
                      "1", 0.0)
    pert = assemble_coefficients(law, GRID, [0.0])
    _, h, rep = correct_initial_data(VAC, pert, ZERO_F, G_WALL, U0_WALL, 2)
    assert np.abs(h).max() <= 1e-10
    assert rep.passed


def test_correction_order_cap():
    from maxwellpec.compat import LiftFailure
    with pytest.raises(LiftFailure):
        correct_initial_data(VAC, _perturbed(1e-3), ZERO_F, G_WALL,
                             U0_WALL, 4)


def test_singular_theta_guard():
    from maxwellpec.compat import SingularTheta
    a0 = np.diag([1.0, 1.0, -0.1, 1.0, 1.0, 1.0])  # kernel block indefinite
    with pytest.raises(SingularTheta):
        kernel_solve(a0, np.ones(6), 1, eta=0.5)
