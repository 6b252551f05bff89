import numpy as np
import pytest

from maxwellpec.grid import Grid
from maxwellpec.mollify import (MollifierPair, ScaleOrderError, chi_kernel,
                                chi_transfer, mollify_normal,
                                mollify_tangential, translate_toward_wall)

GRID = Grid(1.0, 1.0, 1.0, 16, 16, 17)


def test_rho_kernel_properties():
    pair = MollifierPair(epsilon=3 * GRID.hz, delta=4 * GRID.hz)
    kern = pair.rho_stencil(GRID)
    assert kern.min() >= 0.0
    assert kern.sum() == pytest.approx(1.0, abs=1e-14)
    # support inside the epsilon ball: corner offsets must be zero
    assert kern[0, 0, 0] == 0.0


def test_scale_order_guard():
    v = np.zeros((2,) + GRID.shape)
    with pytest.raises(ScaleOrderError):
        mollify_normal(v, MollifierPair(epsilon=0.5, delta=0.25), GRID)


def test_constant_preserved():
    pair = MollifierPair(epsilon=2 * GRID.hz, delta=3 * GRID.hz)
    v = np.full(GRID.shape, -1.75)
    out = mollify_normal(v, pair, GRID)
    assert np.abs(out + 1.75).max() < 1e-13


def test_translation_shifts_toward_wall():
    _, _, x3 = GRID.meshes()
    v = np.broadcast_to(x3 ** 2, GRID.shape).copy()
    out = translate_toward_wall(v, 2 * GRID.hz, GRID)
    inner = out[..., :-2]
    expected = ((x3 + 2 * GRID.hz) ** 2 * np.ones(GRID.shape))[..., :-2]
    assert np.abs(inner - expected).max() < 1e-14


def test_commutes_with_interior_derivatives():
    rng = np.random.default_rng(3)
    pair = MollifierPair(epsilon=2 * GRID.hz, delta=4 * GRID.hz)
    v = rng.normal(size=GRID.shape)
    for deriv in (GRID.d1, GRID.d2):
        a = deriv(mollify_normal(v, pair, GRID))
        b = mollify_normal(deriv(v), pair, GRID)
        assert np.abs(a - b).max() < 1e-12


def test_smoothing_scale_convergence_table():
    # epsilon -> 0 at fixed delta: output approaches the bare translation
    x1, x2, x3 = GRID.meshes()
    v = (np.sin(2 * np.pi * x1) * np.cos(2 * np.pi * x2) * (x3 + 0.3) ** 2
         * np.ones(GRID.shape))
    delta = 8 * GRID.hz
    target = translate_toward_wall(v, delta, GRID)
    errs = []
    for mult in (4, 2, 1):
        pair = MollifierPair(epsilon=mult * GRID.hz, delta=delta)
        errs.append(GRID.norm_l2(mollify_normal(v, pair, GRID) - target))
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] == 0.0  # one-point kernel degenerates to the identity


def test_chi_annihilates_constants_exactly():
    out = mollify_tangential(np.full(GRID.shape, 4.2), 0.15, GRID, order=1)
    assert np.abs(out).max() < 1e-12


def test_chi_transfer_vanishing_order_at_zero():
    for order in (1, 2):
        tr = np.abs(chi_transfer(0.15, GRID, order))
        assert tr[0, 0] < 1e-12 * tr.max()
        # |F chi(xi)| <= C |xi|^{order+1} near zero, checked on the
        # first few nonzero frequencies along each axis
        xi1 = 2 * np.pi * np.fft.fftfreq(GRID.nx, d=GRID.hx)
        ratios = [tr[k, 0] / abs(0.15 * xi1[k]) ** (order + 1)
                  for k in (1, 2, 3)]
        assert max(ratios) < 10 * min(ratios) + 1.0


def test_chi_transfer_nonzero_on_rays():
    tr = np.abs(chi_transfer(0.2, GRID, order=1))
    # along each sampled ray some scale must see the kernel
    assert tr[1:, 0].max() > 1e-8
    assert tr[0, 1:].max() > 1e-8
    diag = np.array([tr[k, k] for k in range(1, GRID.nx // 2)])
    assert diag.max() > 1e-8


def test_single_mode_amplitude_matches_transfer():
    k_index = 3
    x1, _, _ = GRID.meshes()
    mode = np.exp(2j * np.pi * k_index * x1) * np.ones(GRID.shape)
    eps = 0.2
    out = (mollify_tangential(np.real(mode), eps, GRID)
           + 1j * mollify_tangential(np.imag(mode), eps, GRID))
    amp = chi_transfer(eps, GRID)[k_index, 0]
    assert np.abs(out - amp * mode).max() < 1e-12


def test_direct_convolution_oracle():
    # circular tangential convolution evaluated by explicit summation
    rng = np.random.default_rng(9)
    small = Grid(1.0, 1.0, 1.0, 6, 6, 5)
    v = rng.normal(size=small.shape)
    eps = 0.2
    kern = chi_kernel(eps, small, order=1)
    direct = np.zeros_like(v)
    for i in range(small.nx):
        for j in range(small.ny):
            acc = np.zeros(small.nz)
            for p in range(small.nx):
                for q in range(small.ny):
                    acc += kern[p, q] * v[(i - p) % small.nx,
                                          (j - q) % small.ny]
            direct[i, j] = acc * small.hx * small.hy
    fft_path = mollify_tangential(v, eps, small)
    assert np.abs(direct - fft_path).max() < 1e-12


def test_commutator_with_lipschitz_coefficient_decays():
    # || [a, J_eps] v || -> 0 as eps -> 0 for Lipschitz a
    x1, x2, _ = GRID.meshes()
    a = 1.0 + 0.5 * np.sin(2 * np.pi * x1) * np.ones(GRID.shape)
    rng = np.random.default_rng(4)
    v = rng.normal(size=GRID.shape)
    errs = []
    for eps in (4 * GRID.hx, 2 * GRID.hx, GRID.hx):
        comm = a * mollify_tangential(v, eps, GRID) \
            - mollify_tangential(a * v, eps, GRID)
        errs.append(GRID.norm_l2(comm))
    assert errs[0] > errs[1] > errs[2]
