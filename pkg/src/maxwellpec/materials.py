"""Material laws and assembly of the variable-coefficient system.

A law (eps, mu, sigma) with eps, mu symmetric and uniformly positive
definite (floor eta) is packed into the first-order form

    A0 = blockdiag(eps, mu),   D = blockdiag(d_t eps + sigma, d_t mu),

with spatial coefficients A1, A2, A3 equal to the constant curl
matrices in the untransformed model.  Chart-transported problems swap
in variable A1, A2 through the same container.
"""

from __future__ import annotations

import numpy as np
import sympy as sp

from . import structure
from .fields import (ConstantField, FieldDescriptor, SampledField,
                     SymbolicField, TimeSampledField, as_field, on_grid)
from .grid import Grid, spatial_multi_indices

__all__ = [
    "MaterialLaw", "CoefficientSet", "assemble_coefficients",
    "fm_norm_estimate", "PositivityViolation", "SymmetryViolation",
]

_SYMMETRY_TOL = 1e-12


class PositivityViolation(ValueError):
    """eps or mu (or A0) drops below the positivity floor eta."""


class SymmetryViolation(ValueError):
    """eps or mu is not symmetric at some sample."""


def _min_eig(a: np.ndarray) -> float:
    """Smallest eigenvalue over all nodes of a (k,k,...) symmetric field."""
    k = a.shape[0]
    pts = np.moveaxis(a.reshape(k, k, -1), -1, 0)
    return float(np.linalg.eigvalsh(pts)[..., 0].min())


def _check_sym_spd(mat: np.ndarray, eta: float, name: str):
    k = mat.shape[0]
    asym = np.abs(mat - np.swapaxes(mat, 0, 1)).max()
    if asym > _SYMMETRY_TOL:
        raise SymmetryViolation(f"{name} asymmetry {asym:.3e} exceeds {_SYMMETRY_TOL}")
    low = _min_eig(mat)
    if low < eta:
        raise PositivityViolation(
            f"min eigenvalue of {name} is {low:.6e} < eta = {eta:.6e}")


class MaterialLaw:
    """Permittivity/permeability/conductivity triple with positivity floor.

    eps, mu, sigma accept expressions (str / number / nested lists),
    constant arrays, grid-sampled arrays, or FieldDescriptors.  The
    optional constant_outside flag records that the law equals
    `limit_values` outside a compact set; on the truncated slab this is
    modelled as equality on the outer two x3 planes.
    """

    def __init__(self, eps, mu, sigma=0.0, eta: float = 1e-3,
                 grid: Grid | None = None,
                 constant_outside: bool = False, limit_values=None):
        self.eps = as_field(eps, (3, 3), grid)
        self.mu = as_field(mu, (3, 3), grid)
        self.sigma = as_field(sigma, (3, 3), grid)
        self.eta = float(eta)
        self.constant_outside = constant_outside
        self.limit_values = limit_values

    @classmethod
    def vacuum(cls, eta: float = 1e-3) -> "MaterialLaw":
        return cls(np.eye(3), np.eye(3), np.zeros((3, 3)), eta=eta)

    @property
    def is_symbolic(self) -> bool:
        return all(isinstance(f, (SymbolicField, ConstantField))
                   for f in (self.eps, self.mu, self.sigma))

    def validate(self, grid: Grid, times) -> None:
        for t in times:
            for name, f in (("eps", self.eps), ("mu", self.mu)):
                _check_sym_spd(np.atleast_3d(f.at(t, grid)), self.eta, name)
        if self.constant_outside and self.limit_values is not None:
            eps_inf, mu_inf = self.limit_values[:2]
            for name, f, lim in (("eps", self.eps, eps_inf),
                                 ("mu", self.mu, mu_inf)):
                shell = f.at(times[0], grid)
                if shell.ndim > 2:
                    dev = np.abs(shell[..., -2:] -
                                 np.asarray(lim)[..., None]).max()
                    if dev > 1e-10:
                        raise ValueError(
                            f"{name} deviates from its limit on the outer "
                            f"shell by {dev:.3e}")


def _blockdiag_sym(top: sp.MatrixBase, bottom: sp.MatrixBase):
    z = sp.zeros(3, 3)
    return sp.ImmutableDenseMatrix(sp.Matrix([[top, z], [z, bottom]]))


def _blockdiag_arr(top: np.ndarray, bottom: np.ndarray) -> np.ndarray:
    out = np.zeros((6, 6) + top.shape[2:])
    out[:3, :3] = top
    out[3:, 3:] = bottom
    return out


def _on_grid(values: np.ndarray, grid: Grid) -> np.ndarray:
    """Expand a bare (3,3) sample to (3,3, grid) by broadcasting."""
    if values.ndim == 2:
        values = values.reshape(3, 3, 1, 1, 1)
    return np.broadcast_to(values, (3, 3) + grid.shape)


def _compose_blockdiag(top: FieldDescriptor, bottom: FieldDescriptor,
                       grid: Grid, times) -> FieldDescriptor:
    """blockdiag of two (3,3) descriptors, staying exact when possible."""
    if hasattr(top, "sym") and hasattr(bottom, "sym"):
        return SymbolicField(_blockdiag_sym(top.sym, bottom.sym))
    if top.is_static and bottom.is_static:
        a = np.asarray(top.at(times[0], grid), dtype=float)
        b = np.asarray(bottom.at(times[0], grid), dtype=float)
        if a.ndim == 2 and b.ndim == 2:
            return ConstantField(_blockdiag_arr(a, b))
        return SampledField(_blockdiag_arr(_on_grid(a, grid),
                                           _on_grid(b, grid)), grid, 2)
    vals = np.stack([_blockdiag_arr(_on_grid(np.asarray(top.at(t, grid)), grid),
                                    _on_grid(np.asarray(bottom.at(t, grid)), grid))
                     for t in times])
    return TimeSampledField(times, vals, grid, 2)


class _SumField(FieldDescriptor):
    """Pointwise sum of two descriptors of the same shape."""

    def __init__(self, a: FieldDescriptor, b: FieldDescriptor):
        self.a, self.b = a, b
        self.shape = a.shape
        self.is_static = a.is_static and b.is_static
        self.has_exact_derivatives = (a.has_exact_derivatives
                                      and b.has_exact_derivatives)

    def at(self, t, grid):
        va, vb = self.a.at(t, grid), self.b.at(t, grid)
        if va.ndim != vb.ndim:
            tgt = np.broadcast_shapes(va.shape, vb.shape)
            va = np.broadcast_to(va, tgt)
            vb = np.broadcast_to(vb, tgt)
        return va + vb

    def dt(self, n=1):
        return _SumField(self.a.dt(n), self.b.dt(n))

    def dx(self, axis, n=1):
        return _SumField(self.a.dx(axis, n), self.b.dx(axis, n))

    @property
    def sym(self) -> "sp.ImmutableDenseMatrix":
        return sp.ImmutableDenseMatrix(self.a.sym + self.b.sym)


class CoefficientSet:
    """Coefficients (A0, A1, A2, A3, D) plus the mu-decomposition.

    a1, a2 are time independent; a3 is the constant curl matrix unless a
    chart transport replaced the spatial part.  mu_lj holds the span
    coordinates of (A1, A2, A3) in the constant curl matrices; for the
    untransformed model it is the identity.
    """

    def __init__(self, a0: FieldDescriptor, d: FieldDescriptor,
                 a1: FieldDescriptor, a2: FieldDescriptor,
                 a3: FieldDescriptor, mu_lj: FieldDescriptor,
                 eta: float, grid: Grid, times=None):
        self.a0, self.d = a0, d
        self.a1, self.a2, self.a3 = a1, a2, a3
        self.mu_lj = mu_lj
        self.eta = float(eta)
        self.grid = grid
        self.times = None if times is None else np.asarray(times, dtype=float)
        self._static_cache: dict = {}

    # -- evaluation with caching of static pieces ---------------------------

    def _eval(self, name: str, f: FieldDescriptor, t: float) -> np.ndarray:
        if f.is_static:
            if name not in self._static_cache:
                self._static_cache[name] = f.at(0.0, self.grid)
            return self._static_cache[name]
        return f.at(t, self.grid)

    def a0_at(self, t: float) -> np.ndarray:
        return self._eval("a0", self.a0, t)

    def d_at(self, t: float) -> np.ndarray:
        return self._eval("d", self.d, t)

    def spatial_at(self, j: int, t: float = 0.0) -> np.ndarray:
        f = (self.a1, self.a2, self.a3)[j]
        return self._eval(f"a{j + 1}", f, t)

    def a0_inv_at(self, t: float, floor: float | None = None) -> np.ndarray:
        key = ("a0inv", None if not self.a0.is_static else "static")
        if self.a0.is_static and key in self._static_cache:
            return self._static_cache[key]
        a0 = self.a0_at(t)
        inv = _invert_spd(a0, self.eta if floor is None else floor)
        if self.a0.is_static:
            self._static_cache[key] = inv
        return inv

    def a0_is_identity(self) -> bool:
        a0 = self.a0_at(0.0)
        return self.a0.is_static and a0.ndim == 2 and \
            np.array_equal(a0, np.eye(6))

    def d_is_zero(self) -> bool:
        d = self.d_at(0.0)
        return self.d.is_static and not np.any(d)

    def spatial_norm_bound(self) -> float:
        """sup over nodes of max_j ||A_j||_2 (2-norm of the 6x6 blocks)."""
        worst = 0.0
        for j in range(3):
            a = self.spatial_at(j)
            if a.ndim == 2:
                worst = max(worst, float(np.linalg.norm(a, 2)))
            else:
                pts = np.moveaxis(a.reshape(6, 6, -1), -1, 0)
                worst = max(worst, float(
                    np.linalg.norm(pts, 2, axis=(1, 2)).max()))
        return worst

    def min_eig_a0(self, t: float = 0.0) -> float:
        a0 = self.a0_at(t)
        if a0.ndim == 2:
            return float(np.linalg.eigvalsh(a0)[0])
        return _min_eig(a0)


def _invert_spd(a: np.ndarray, floor: float) -> np.ndarray:
    """Nodewise inverse of a symmetric (6,6[,grid]) field, guarded by floor."""
    if a.ndim == 2:
        if np.linalg.eigvalsh(a)[0] < floor:
            raise PositivityViolation("matrix below positivity floor")
        return np.linalg.inv(a)
    pts = np.moveaxis(a.reshape(a.shape[0], a.shape[1], -1), -1, 0)
    if np.linalg.eigvalsh(pts)[..., 0].min() < floor:
        raise PositivityViolation("matrix below positivity floor at a node")
    inv = np.linalg.inv(pts)
    return np.moveaxis(inv, 0, -1).reshape(a.shape)


def assemble_coefficients(law: MaterialLaw, grid: Grid,
                          times) -> CoefficientSet:
    """Build (A0, D, A1, A2, A3) from a material law on the grid.

    Raises PositivityViolation / SymmetryViolation when the law breaks
    its invariants at any requested sample.
    """
    times = np.asarray(times, dtype=float)
    law.validate(grid, times)
    a0 = _compose_blockdiag(law.eps, law.mu, grid, times)
    d = _compose_blockdiag(_SumField(law.eps.dt(), law.sigma),
                           law.mu.dt(), grid, times)
    s = structure.build_structure_matrices()
    return CoefficientSet(
        a0=a0, d=d,
        a1=ConstantField(s.a1), a2=ConstantField(s.a2), a3=ConstantField(s.a3),
        mu_lj=ConstantField(np.eye(3)),
        eta=law.eta, grid=grid, times=times,
    )


def fm_norm_estimate(field: FieldDescriptor, m: int, grid: Grid,
                     times) -> float:
    """Discrete surrogate of the coefficient-space norm of order m.

    max of the W^{1,inf} part (sup of the field and its first time/space
    derivatives) and, for 1 <= |alpha| <= m over space-time multi-indices,
    the sup over t of the L2 norm of d^alpha field.
    """
    if m > 3:
        raise ValueError("orders above 3 are not supported")
    times = np.asarray(times, dtype=float)

    def sup_norm(f):
        return max(float(np.abs(f.at(t, grid)).max()) for t in times)

    def sup_l2(f):
        return max(grid.norm_l2(on_grid(f.at(t, grid), field.shape,
                                        grid.shape)) for t in times)

    value = sup_norm(field)
    first = [field.dt()] + [field.dx(ax) for ax in range(3)]
    value = max(value, *[sup_norm(f) for f in first])

    for k_t in range(m + 1):
        base = field.dt(k_t) if k_t else field
        for alpha in [(0, 0, 0)] + spatial_multi_indices(m - k_t):
            if k_t + sum(alpha) < 1:
                continue
            f = base
            for axis, cnt in enumerate(alpha):
                if cnt:
                    f = f.dx(axis, cnt)
            value = max(value, sup_l2(f))
    return value
