"""Compatibility conditions at the initial time and their restoration.

A solution with m time derivatives forces, at t = t0, the trace
identities

    B S_{m,p} = d_t^p g(t0)  on the wall,  0 <= p <= m - 1,

where S_{m,p} expresses d_t^p u(t0) through coefficients and data:

    S_{m,0} = u0,
    S_{m,p} = A0(t0)^{-1} ( d_t^{p-1} f(t0) - sum_j A_j d_j S_{m,p-1}
              - sum_{l=1}^{p-1} C(p-1,l) d_t^l A0(t0) S_{m,p-l}
              - sum_{l=0}^{p-1} C(p-1,l) d_t^l D(t0) S_{m,p-1-l} ).

Closed-form data is differentiated exactly; sampled data falls back on
the grid stencils (and a correspondingly relaxed tolerance).  The
module also inverts the kernel obstruction A3 (-A0^{-1} A3)^p on the
range of A3 and uses it to repair the compatibility conditions after a
coefficient perturbation, by lifting wall corrections into the slab.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import sympy as sp

from . import structure
from .fields import (ConstantField, FieldDescriptor, SymbolicField, T, X1,
                     X2, X3, matvec, on_grid)
from .grid import Grid
from .materials import CoefficientSet, PositivityViolation

__all__ = [
    "SingularMass", "SingularTheta", "LiftFailure", "CompatReport",
    "CorrectedInitial", "s_mp", "check_compatibility", "kernel_solve",
    "correct_initial_data",
]

_STRUCT = structure.build_structure_matrices()
_SPACE = (X1, X2, X3)


class SingularMass(ValueError):
    """A0(t0) lost definiteness below eta/2 at some node."""


class SingularTheta(ValueError):
    """The 2x2 kernel block of A0 lost definiteness (guarded, cannot
    occur for admissible A0)."""


class LiftFailure(ValueError):
    """Requested correction order exceeds the supported lifting order."""


@dataclass
class CorrectedInitial:
    """Initial datum as closed-form base plus a grid correction field."""

    base: FieldDescriptor
    correction: np.ndarray

    def at(self, t, grid: Grid) -> np.ndarray:
        return on_grid(self.base.at(t, grid), (6,), grid.shape) \
            + self.correction


@dataclass
class CompatReport:
    """Wall residuals of the order-m compatibility conditions."""

    order: int
    residuals: list
    tol: float
    passed: bool
    mode: str
    s_values: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "order": self.order,
            "residuals": [float(r) for r in self.residuals],
            "tol": self.tol,
            "passed": bool(self.passed),
            "mode": self.mode,
        }


def _symbolic_available(coeffs: CoefficientSet, f, u0) -> bool:
    pieces = [coeffs.a0, coeffs.d, coeffs.a1, coeffs.a2, coeffs.a3, f, u0]
    return all(isinstance(p, (SymbolicField, ConstantField)) for p in pieces)


def _sym_inverse(a0_t0: sp.Matrix) -> sp.Matrix:
    """Inverse of the frozen mass matrix; blockwise when block-diagonal."""
    off_zero = all(a0_t0[i, j] == 0 and a0_t0[j, i] == 0
                   for i in range(3) for j in range(3, 6))
    if off_zero:
        top = sp.Matrix(a0_t0[:3, :3]).inv()
        bot = sp.Matrix(a0_t0[3:, 3:]).inv()
        z = sp.zeros(3, 3)
        return sp.Matrix([[top, z], [z, bot]])
    return sp.Matrix(a0_t0).inv()


def _s_chain_symbolic(coeffs: CoefficientSet, f, u0, p_max: int,
                      t0: float):
    """S_{m,0..p_max} as purely spatial sympy vectors."""
    a0_t0 = sp.Matrix(coeffs.a0.sym.subs(T, t0))
    a0_inv = _sym_inverse(a0_t0)
    a_spatial = [sp.Matrix(c.sym) for c in (coeffs.a1, coeffs.a2, coeffs.a3)]
    d_sym = coeffs.d.sym
    f_sym = f.sym

    chain = [sp.Matrix(u0.sym)]
    for p in range(1, p_max + 1):
        rhs = sp.Matrix(f_sym.diff(T, p - 1).subs(T, t0))
        for j in range(3):
            rhs -= a_spatial[j] * chain[p - 1].diff(_SPACE[j])
        for l in range(1, p):
            rhs -= math.comb(p - 1, l) \
                * sp.Matrix(coeffs.a0.sym.diff(T, l).subs(T, t0)) \
                * chain[p - l]
        for l in range(p):
            rhs -= math.comb(p - 1, l) \
                * sp.Matrix(d_sym.diff(T, l).subs(T, t0)) * chain[p - 1 - l]
        chain.append(a0_inv * rhs)
    return chain


def _s_chain_discrete(coeffs: CoefficientSet, f, u0_values: np.ndarray,
                      p_max: int, t0: float):
    """Grid recursion with stencil derivatives (one-sided at the walls)."""
    grid = coeffs.grid
    try:
        a0_inv = coeffs.a0_inv_at(t0, floor=coeffs.eta / 2)
    except PositivityViolation as exc:
        raise SingularMass(str(exc)) from exc
    chain = [np.array(u0_values, dtype=float)]
    for p in range(1, p_max + 1):
        rhs = on_grid(f.dt(p - 1).at(t0, grid), (6,), grid.shape).copy()
        for j in range(3):
            rhs -= matvec(coeffs.spatial_at(j), grid.deriv(chain[p - 1], j))
        for l in range(1, p):
            dt_a0 = coeffs.a0.dt(l).at(t0, grid)
            if np.any(dt_a0):
                rhs -= math.comb(p - 1, l) * matvec(dt_a0, chain[p - l])
        for l in range(p):
            dt_d = coeffs.d.dt(l).at(t0, grid)
            if np.any(dt_d):
                rhs -= math.comb(p - 1, l) * matvec(dt_d, chain[p - 1 - l])
        chain.append(matvec(a0_inv, rhs))
    return chain


_ZERO_F = ConstantField(np.zeros(6))


def s_mp_chain(coeffs: CoefficientSet, f, u0, p_max: int, t0: float = 0.0,
               mode: str = "auto"):
    """Evaluate S_{m,0..p_max} on the grid; returns (list of arrays, mode)."""
    grid = coeffs.grid
    if isinstance(u0, CorrectedInitial):
        base_chain, used = s_mp_chain(coeffs, f, u0.base, p_max, t0, mode)
        corr_chain = _s_chain_discrete(coeffs, _ZERO_F, u0.correction,
                                       p_max, t0)
        return [b + c for b, c in zip(base_chain, corr_chain)], \
            f"{used}+discrete"
    symbolic_ok = _symbolic_available(coeffs, f, u0)
    if mode == "analytic" and not symbolic_ok:
        raise ValueError("analytic mode requires closed-form data")
    if mode == "auto":
        mode = "analytic" if symbolic_ok else "discrete"
    if mode == "analytic":
        chain = _s_chain_symbolic(coeffs, f, u0, p_max, t0)
        vals = [SymbolicField(sp.ImmutableDenseMatrix(c), vector=True)
                .at(t0, grid) for c in chain]
        vals = [on_grid(v, (6,), grid.shape) for v in vals]
        return vals, "analytic"
    if isinstance(u0, FieldDescriptor):
        u0_values = on_grid(u0.at(t0, grid), (6,), grid.shape)
    else:
        u0_values = np.asarray(u0, dtype=float)
    return _s_chain_discrete(coeffs, f, u0_values, p_max, t0), "discrete"


def s_mp(coeffs: CoefficientSet, f, u0, p: int, t0: float = 0.0,
         mode: str = "auto") -> np.ndarray:
    """The field S_{m,p} on the grid (p = 0 returns u0 unchanged)."""
    if p > 3:
        raise ValueError("recursion depth above 3 is not supported")
    chain, _ = s_mp_chain(coeffs, f, u0, p, t0, mode)
    return chain[p]


def _wall_values(desc, p: int, t0: float, grid: Grid,
                 comps: int) -> np.ndarray:
    """d_t^p of a descriptor evaluated on the wall plane x3 = 0."""
    d = desc.dt(p) if p else desc
    vals = on_grid(d.at(t0, grid), (comps,), grid.shape)
    return vals[..., 0]


def default_tolerance(mode: str, grid: Grid) -> float:
    """1e-8 for closed-form data, resolution-scaled for sampled data."""
    return 1e-8 if mode == "analytic" else 4.0 * grid.h_max ** 2


def check_compatibility(coeffs: CoefficientSet, f, g, u0, m: int,
                        t0: float = 0.0, tol: float | None = None,
                        mode: str = "auto") -> CompatReport:
    """Wall residuals ||B S_{m,p} - d_t^p g(t0)||_{L2(wall)} for p < m."""
    grid = coeffs.grid
    chain, used_mode = s_mp_chain(coeffs, f, u0, max(m - 1, 0), t0, mode)
    base_mode = "analytic" if used_mode.startswith("analytic") else "discrete"
    if tol is None:
        tol = default_tolerance(base_mode, grid)
    b = _STRUCT.b
    residuals = []
    for p in range(m):
        trace = np.tensordot(b, chain[p][..., 0], axes=([1], [0]))
        g_p = _wall_values(g, p, t0, grid, 2)
        residuals.append(grid.wall_norm_l2(trace - g_p))
    passed = all(r <= tol for r in residuals)
    return CompatReport(order=m, residuals=residuals, tol=tol,
                        passed=passed, mode=used_mode, s_values=chain)


# -- kernel inversion ---------------------------------------------------------


def _theta_inverse(a0: np.ndarray, eta: float):
    t00 = a0[2, 2]
    t01 = a0[2, 5]
    t11 = a0[5, 5]
    det = t00 * t11 - t01 * a0[5, 2]
    tr = t00 + t11
    disc = np.sqrt(np.maximum((tr / 2) ** 2 - det, 0.0))
    if float(np.min(tr / 2 - disc)) < eta / 2:
        raise SingularTheta("kernel block of A0 below eta/2")
    return t00, t01, a0[5, 2], t11, det


def kernel_solve(a0_t0: np.ndarray, v0: np.ndarray, p: int,
                 eta: float = 1e-3) -> np.ndarray:
    """Invert A3 (-A0^{-1} A3)^p on the range of A3.

    Returns v_p with A3 (-A0(t0)^{-1} A3)^p v_p = A3 v0, built nodewise:
    the kernel components of -A0 v are cancelled through the 2x2 block
    inverse, and the constant matrix Q cycles the result back onto the
    complement of ker A3.  p = 0 returns v0 unchanged.
    """
    a0 = np.asarray(a0_t0, dtype=float)
    v = np.array(v0, dtype=float)
    if p == 0:
        return v
    t00, t01, t10, t11, det = _theta_inverse(a0, eta)
    q = _STRUCT.q
    for _ in range(p):
        av = matvec(a0, v)
        r0, r1 = av[2], av[5]
        h1 = -(t11 * r0 - t01 * r1) / det
        h2 = -(-t10 * r0 + t00 * r1) / det
        v = v.copy()
        v[2] = v[2] + h1
        v[5] = v[5] + h2
        w0 = -matvec(a0, v)
        v = np.tensordot(q, w0, axes=([1], [0]))
    return v


# -- compatibility-preserving correction --------------------------------------


def _lift_cutoff(grid: Grid) -> np.ndarray:
    """Smooth cutoff in x3: identically 1 through the wall stencil,
    vanishing before the cap."""
    _, _, x3 = grid.axes()
    z0 = max(grid.lz / 4.0, 2.01 * grid.hz)
    z1 = max(3.0 * grid.lz / 4.0, z0 + 2 * grid.hz)
    if z1 >= grid.lz:
        raise LiftFailure("grid too shallow to lift wall corrections")

    def smooth(s):
        out = np.zeros_like(s)
        inside = (s > 0) & (s < 1)
        e1 = np.exp(-1.0 / np.where(inside, s, 1.0))
        e2 = np.exp(-1.0 / np.where(inside, 1.0 - s, 1.0))
        out[inside] = e2[inside] / (e1[inside] + e2[inside])
        out[s <= 0] = 1.0
        return out

    return smooth((x3 - z0) / (z1 - z0))


def correct_initial_data(coeffs: CoefficientSet,
                         perturbed: CoefficientSet, f, g, u0, m: int,
                         t0: float = 0.0,
                         defect_floor: float = 1e-13):
    """Repair the order-m compatibility conditions after perturbing the
    coefficients, by adding a wall-supported field h to u0.

    Order by order the wall defect of the perturbed tuple is mapped
    through the kernel inversion, its trace b_p lifted into the slab as
    b_p x3^p / p! times a smooth cutoff (so lower-order wall traces are
    untouched), and the defects re-evaluated before the next order.
    Returns (corrected initial datum, h, report of the corrected tuple).
    """
    if m > 3:
        raise LiftFailure("corrections above order 3 are not supported")
    grid = coeffs.grid
    cutoff = _lift_cutoff(grid)
    _, _, x3 = grid.axes()
    b = _STRUCT.b
    h = np.zeros((6,) + grid.shape)
    corrected = CorrectedInitial(base=_as_descriptor(u0, grid), correction=h)
    a0_pert = perturbed.a0_at(t0)

    for p in range(1, m):
        chain, _ = s_mp_chain(perturbed, f, corrected, p, t0)
        trace = np.tensordot(b, chain[p][..., 0], axes=([1], [0]))
        defect = _wall_values(g, p, t0, grid, 2) - trace  # (2, nx, ny)
        scale = max(np.abs(defect).max(), 0.0)
        if scale <= defect_floor * max(1.0, np.abs(chain[p]).max()):
            continue
        w = np.zeros((6,) + grid.shape)
        w[0] = -defect[1][..., None]
        w[1] = defect[0][..., None]
        a_p = kernel_solve(a0_pert, w, p, eta=perturbed.eta)
        b_p = a_p[..., 0]  # wall trace, (6, nx, ny)
        profile = (x3 ** p / math.factorial(p)) * cutoff
        h += b_p[..., None] * profile
    report = check_compatibility(perturbed, f, g, corrected, m, t0)
    return corrected, h, report


def _as_descriptor(u0, grid: Grid) -> FieldDescriptor:
    if isinstance(u0, CorrectedInitial):
        raise TypeError("already corrected; pass the original datum")
    if isinstance(u0, FieldDescriptor):
        return u0
    u0 = np.asarray(u0, dtype=float)
    if u0.shape == (6,):
        return ConstantField(u0)
    from .fields import SampledField
    return SampledField(u0, grid, 1)
