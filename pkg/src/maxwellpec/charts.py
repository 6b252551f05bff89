"""Chart transport of the curl structure and wall normalization.

Pulling the operator back through a boundary chart phi turns the
constant curl matrices into variable combinations

    A_l = sum_j A_j^co (d_j phi_l o phi^{-1}),

which stay inside the span of the constant matrices nodewise.  A
pointwise congruence u = G v with

    Ghat = mu_33^{-1/2} [[1, 0, mu_13], [0, 1, mu_23], [0, 0, mu_33]],
    G = blockdiag(Ghat, Ghat),

restores the wall coefficient exactly: G^T A_3 G = A_3^co.  Only the
chart case with |mu_33| >= tau is implemented; the other two cases are
reachable by permuting axes first.  A single chart is transported; no
covering or partition of unity is attempted.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import sympy as sp

from . import structure
from .fields import ConstantField, SymbolicField, X1, X2, X3, matvec
from .grid import Grid
from .materials import CoefficientSet

__all__ = [
    "DegenerateChart", "ChartDescriptor", "ChartTransport", "Normalizer",
    "transport_operator", "normalize", "pullback_solution",
    "pushforward_data", "rotation_chart", "tilt_chart",
    "vertical_stretch_chart", "identity_chart",
]

_STRUCT = structure.build_structure_matrices()
_SPACE = (X1, X2, X3)


class DegenerateChart(ValueError):
    """The chart's wall-normal coefficient drops below tau."""


@dataclass(frozen=True)
class ChartDescriptor:
    """Diffeomorphism given by closed-form components and inverse.

    phi maps original coordinates to half-space coordinates; phi_inv
    undoes it.  Both are 3-tuples of sympy expressions in (x1, x2, x3).
    """

    phi: tuple
    phi_inv: tuple
    name: str = "chart"

    def jacobian_on_halfspace(self) -> sp.ImmutableDenseMatrix:
        """mu with mu_{jl} = (d_j phi_l) o phi_inv, in half-space coords."""
        subs = {X1: self.phi_inv[0], X2: self.phi_inv[1], X3: self.phi_inv[2]}
        entries = [[sp.diff(self.phi[l], _SPACE[j]).subs(subs, simultaneous=True)
                    for l in range(3)] for j in range(3)]
        return sp.ImmutableDenseMatrix(entries)

    def verify_inverse(self, grid: Grid, tol: float = 1e-10) -> float:
        """max | phi(phi_inv(y)) - y | sampled on the grid."""
        subs = {X1: self.phi_inv[0], X2: self.phi_inv[1], X3: self.phi_inv[2]}
        comp = sp.ImmutableDenseMatrix(
            [self.phi[l].subs(subs, simultaneous=True) - _SPACE[l]
             for l in range(3)])
        dev = SymbolicField(comp, vector=True).at(0.0, grid)
        worst = float(np.abs(dev).max())
        if worst > tol:
            raise ValueError(f"phi o phi_inv deviates from id by {worst:.3e}")
        return worst


def identity_chart() -> ChartDescriptor:
    return ChartDescriptor(phi=(X1, X2, X3), phi_inv=(X1, X2, X3),
                           name="identity")


def rotation_chart(angle: float, axis: int = 2) -> ChartDescriptor:
    """Rotation about a coordinate axis (constant Jacobian)."""
    c, s = sp.Float(np.cos(angle)), sp.Float(np.sin(angle))
    x = [X1, X2, X3]
    i, j = [(1, 2), (2, 0), (0, 1)][axis]
    phi = list(x)
    phi[i] = c * x[i] - s * x[j]
    phi[j] = s * x[i] + c * x[j]
    inv = list(x)
    inv[i] = c * x[i] + s * x[j]
    inv[j] = -s * x[i] + c * x[j]
    return ChartDescriptor(phi=tuple(phi), phi_inv=tuple(inv),
                           name=f"rotation{axis}")


def tilt_chart(a: float, b: float) -> ChartDescriptor:
    """Shear of the normal coordinate: x3 -> x3 + a x1 + b x2."""
    phi = (X1, X2, X3 + a * X1 + b * X2)
    inv = (X1, X2, X3 - a * X1 - b * X2)
    return ChartDescriptor(phi=phi, phi_inv=inv, name="tilt")


def vertical_stretch_chart(amp: float) -> ChartDescriptor:
    """Wall-preserving stretch x3 -> x3 (1 + amp sin(2 pi x1)), |amp| < 1.

    The modulation is tangentially periodic so transported coefficients
    stay compatible with the periodic slab.
    """
    if abs(amp) >= 1:
        raise ValueError("|amp| must be below 1")
    fac = 1 + amp * sp.sin(2 * sp.pi * X1)
    phi = (X1, X2, X3 * fac)
    inv = (X1, X2, X3 / fac)
    return ChartDescriptor(phi=phi, phi_inv=inv, name="vertical_stretch")


@dataclass
class ChartTransport:
    """Transported coefficients on the half-space plus span coordinates."""

    chart: ChartDescriptor
    mu: SymbolicField            # (3,3), columns are span coordinates
    coeffs: CoefficientSet       # A0, D composed; A1..A3 transported
    tau: float


def _combine_span(mu_mat: sp.MatrixBase, col: int) -> sp.MutableDenseMatrix:
    """sum_j A_j^co mu_{j,col} as a sympy 6x6."""
    out = sp.zeros(6, 6)
    for j in range(3):
        out += sp.Matrix(_STRUCT.a[j]) * mu_mat[j, col]
    return out


def transport_operator(chart: ChartDescriptor, coeffs: CoefficientSet,
                       tau: float = 0.1) -> ChartTransport:
    """Transport the operator through the chart onto the half-space grid.

    A0 and D are composed with phi_inv; the spatial coefficients become
    span combinations with coordinates from the chart Jacobian.  Raises
    DegenerateChart when |mu_33| < tau anywhere on the grid.
    """
    grid = coeffs.grid
    if not (hasattr(coeffs.a0, "sym") and hasattr(coeffs.d, "sym")):
        raise ValueError("chart transport requires closed-form coefficients")
    chart.verify_inverse(grid)
    mu_mat = chart.jacobian_on_halfspace()
    mu33 = SymbolicField(sp.ImmutableDenseMatrix([[mu_mat[2, 2]]])).at(0.0, grid)
    if float(np.abs(mu33).min()) < tau:
        raise DegenerateChart(
            f"|mu_33| drops to {np.abs(mu33).min():.3e} < tau = {tau}")

    subs = {X1: chart.phi_inv[0], X2: chart.phi_inv[1],
            X3: chart.phi_inv[2]}
    a0_sym = coeffs.a0.sym.subs(subs, simultaneous=True)
    d_sym = coeffs.d.sym.subs(subs, simultaneous=True)
    spatial = [SymbolicField(sp.ImmutableDenseMatrix(_combine_span(mu_mat, l)))
               for l in range(3)]
    transported = CoefficientSet(
        a0=SymbolicField(sp.ImmutableDenseMatrix(a0_sym)),
        d=SymbolicField(sp.ImmutableDenseMatrix(d_sym)),
        a1=spatial[0], a2=spatial[1], a3=spatial[2],
        mu_lj=SymbolicField(mu_mat),
        eta=coeffs.eta, grid=grid, times=coeffs.times,
    )
    return ChartTransport(chart=chart, mu=SymbolicField(mu_mat),
                          coeffs=transported, tau=tau)


@dataclass
class Normalizer:
    """Congruence u = G v restoring the constant wall coefficient."""

    ghat: SymbolicField      # (3,3)
    g: SymbolicField         # (6,6)
    g_inv: SymbolicField     # (6,6)
    a3_deviation: float = 0.0   # measured |G^T A3 G - A3co| before snapping

    def g_at(self, grid: Grid) -> np.ndarray:
        return self.g.at(0.0, grid)

    def g_inv_at(self, grid: Grid) -> np.ndarray:
        return self.g_inv.at(0.0, grid)


def _blockdiag6(m: sp.MatrixBase) -> sp.ImmutableDenseMatrix:
    z = sp.zeros(3, 3)
    return sp.ImmutableDenseMatrix(sp.Matrix([[m, z], [z, m]]))


def build_normalizer(mu_mat: sp.MatrixBase) -> Normalizer:
    m13, m23, m33 = mu_mat[0, 2], mu_mat[1, 2], mu_mat[2, 2]
    ghat = sp.Matrix([[1, 0, m13], [0, 1, m23], [0, 0, m33]]) / sp.sqrt(m33)
    ghat_inv = sp.simplify(ghat.inv())
    return Normalizer(
        ghat=SymbolicField(sp.ImmutableDenseMatrix(ghat)),
        g=SymbolicField(_blockdiag6(ghat)),
        g_inv=SymbolicField(_blockdiag6(ghat_inv)),
    )


def normalize(transport: ChartTransport, f=None, g_data=None, u0=None,
              check_tol: float = 1e-12):
    """Apply the congruence to coefficients (and optionally data).

    Returns (transformed CoefficientSet, Normalizer, transformed data
    dict).  The transformed A3 is checked against the constant wall
    matrix on the grid to check_tol and then replaced by it exactly;
    the boundary matrix of the transformed problem is the constant B.
    """
    grid = transport.coeffs.grid
    mu_mat = transport.mu.sym
    nrm = build_normalizer(mu_mat)
    g_sym = nrm.g.sym
    g_inv_sym = nrm.g_inv.sym

    def congruence(mat_sym):
        return g_sym.T * sp.Matrix(mat_sym) * g_sym

    tc = transport.coeffs
    a_t = [congruence(c.sym) for c in (tc.a1, tc.a2, tc.a3)]

    a3_vals = SymbolicField(sp.ImmutableDenseMatrix(a_t[2])).at(0.0, grid)
    a3_target = _STRUCT.a3 if a3_vals.ndim == 2 else \
        _STRUCT.a3.reshape(6, 6, 1, 1, 1)
    dev = float(np.abs(a3_vals - a3_target).max())
    if dev > check_tol:
        raise DegenerateChart(
            f"normalized A3 deviates from the constant matrix by {dev:.3e}")
    nrm.a3_deviation = dev

    d_t = congruence(tc.d.sym)
    for j in range(3):
        d_t -= congruence((tc.a1, tc.a2, tc.a3)[j].sym) \
            * g_inv_sym.diff(_SPACE[j]) * g_sym

    # congruence floor: eta scaled by the smallest squared singular value of G
    g_vals = nrm.g_at(grid)
    if g_vals.ndim == 2:
        sigma_min = float(np.linalg.svd(g_vals, compute_uv=False).min())
    else:
        pts = np.moveaxis(g_vals.reshape(6, 6, -1), -1, 0)
        sigma_min = float(np.linalg.svd(pts, compute_uv=False).min())
    eta_t = tc.eta * sigma_min ** 2

    # span coordinates of the transformed spatial part:
    # column l maps to det(Ghat) Ghat^{-1} mu_{.l}
    ghat = nrm.ghat.sym
    mu_t = sp.det(ghat) * (ghat.inv() * sp.Matrix(mu_mat))

    coeffs_t = CoefficientSet(
        a0=SymbolicField(sp.ImmutableDenseMatrix(congruence(tc.a0.sym))),
        d=SymbolicField(sp.ImmutableDenseMatrix(d_t)),
        a1=SymbolicField(sp.ImmutableDenseMatrix(a_t[0])),
        a2=SymbolicField(sp.ImmutableDenseMatrix(a_t[1])),
        a3=ConstantField(_STRUCT.a3),
        mu_lj=SymbolicField(sp.ImmutableDenseMatrix(sp.simplify(mu_t))),
        eta=eta_t, grid=grid, times=tc.times,
    )

    data_t = {}
    if f is not None:
        data_t["f"] = SymbolicField(
            sp.ImmutableDenseMatrix(g_sym.T * sp.Matrix(f.sym)), vector=True)
    if g_data is not None:
        data_t["g"] = g_data  # boundary values are unchanged
    if u0 is not None:
        data_t["u0"] = SymbolicField(
            sp.ImmutableDenseMatrix(g_inv_sym * sp.Matrix(u0.sym)),
            vector=True)
    return coeffs_t, nrm, data_t


def pullback_solution(v: np.ndarray, normalizer: Normalizer,
                      grid: Grid) -> np.ndarray:
    """u = G v nodewise (inverse of the data pushforward)."""
    return matvec(normalizer.g_at(grid), v)


def pushforward_data(u: np.ndarray, normalizer: Normalizer,
                     grid: Grid) -> np.ndarray:
    """v = G^{-1} u nodewise."""
    return matvec(normalizer.g_inv_at(grid), u)
