"""Closed-form and sampled field descriptors.

Material laws and data enter either as closed-form expressions in
(t, x1, x2, x3) -- a small interpreted set: polynomials, trig, exp --
or as arrays sampled on the grid.  Closed forms carry exact time and
space derivatives, which keeps differencing noise out of the
compatibility conditions; sampled fields fall back on the grid
stencils.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np
import sympy as sp

from .grid import Grid

__all__ = [
    "T", "X1", "X2", "X3",
    "parse_expr", "parse_matrix", "parse_vector",
    "FieldDescriptor", "SymbolicField", "ConstantField", "SampledField",
    "TimeSampledField", "as_field", "matvec",
]

T, X1, X2, X3 = sp.symbols("t x1 x2 x3", real=True)
_SPACE = (X1, X2, X3)

# names usable inside scenario expression strings
_ALLOWED = {
    "t": T, "x1": X1, "x2": X2, "x3": X3,
    "sin": sp.sin, "cos": sp.cos, "tan": sp.tan,
    "sinh": sp.sinh, "cosh": sp.cosh, "tanh": sp.tanh,
    "exp": sp.exp, "sqrt": sp.sqrt, "log": sp.log,
    "pi": sp.pi, "Abs": sp.Abs,
}


def parse_expr(obj) -> sp.Expr:
    """Turn a number or expression string into a sympy expression."""
    if isinstance(obj, sp.Expr):
        return obj
    if isinstance(obj, (int, float)):
        return sp.Float(obj) if isinstance(obj, float) else sp.Integer(obj)
    if isinstance(obj, str):
        expr = sp.sympify(obj, locals=dict(_ALLOWED))
        bad = expr.free_symbols - {T, X1, X2, X3}
        if bad:
            raise ValueError(f"unknown symbols in expression {obj!r}: {bad}")
        return expr
    raise TypeError(f"cannot parse expression from {type(obj).__name__}")


def parse_matrix(obj, shape) -> sp.ImmutableDenseMatrix:
    """Nested lists of entries -> matrix; a bare scalar means scalar * I."""
    rows, cols = shape
    if isinstance(obj, (int, float, str, sp.Expr)):
        if rows != cols:
            raise ValueError("scalar shorthand only for square matrices")
        e = parse_expr(obj)
        return sp.ImmutableDenseMatrix(rows, cols,
                                       lambda i, j: e if i == j else sp.S.Zero)
    entries = [[parse_expr(v) for v in row] for row in obj]
    mat = sp.ImmutableDenseMatrix(entries)
    if mat.shape != shape:
        raise ValueError(f"expected shape {shape}, got {mat.shape}")
    return mat


def parse_vector(obj, length) -> sp.ImmutableDenseMatrix:
    entries = [parse_expr(v) for v in obj]
    if len(entries) != length:
        raise ValueError(f"expected {length} components, got {len(entries)}")
    return sp.ImmutableDenseMatrix(length, 1, entries)


@lru_cache(maxsize=8192)
def _lambdified(expr):
    return sp.lambdify((T, X1, X2, X3), expr, modules="numpy")


def eval_expr(expr, grid: Grid, t: float) -> np.ndarray:
    """Evaluate one sympy expression on the grid (always a full array)."""
    x1m, x2m, x3m = grid.meshes()
    val = _lambdified(expr)(t, x1m, x2m, x3m)
    out = np.asarray(val, dtype=float)
    if out.shape != grid.shape:
        out = np.ascontiguousarray(np.broadcast_to(out, grid.shape))
    return out


class FieldDescriptor:
    """Common interface: evaluate at (t, grid), differentiate exactly or not.

    shape is (r,) for vector-valued and (r, c) for matrix-valued fields;
    `at` returns an array with the grid axes appended (or a bare (r,)/(r,c)
    array for space-constant fields, which broadcasts in `matvec`).
    """

    shape: tuple
    is_static: bool       # no time dependence
    has_exact_derivatives: bool

    def at(self, t: float, grid: Grid) -> np.ndarray:
        raise NotImplementedError

    def dt(self, n: int = 1) -> "FieldDescriptor":
        raise NotImplementedError

    def dx(self, axis: int, n: int = 1) -> "FieldDescriptor":
        raise NotImplementedError


class SymbolicField(FieldDescriptor):
    """Matrix/vector field backed by a sympy matrix in (t, x1, x2, x3)."""

    has_exact_derivatives = True

    def __init__(self, mat: sp.ImmutableDenseMatrix, vector: bool = False):
        self.sym = sp.ImmutableDenseMatrix(mat)
        self._vector = vector
        self.shape = (mat.shape[0],) if vector else mat.shape
        self.is_static = not any(e.has(T) for e in self.sym)
        self._space_const = not any(
            e.has(X1) or e.has(X2) or e.has(X3) for e in self.sym)

    def at(self, t, grid):
        if self._space_const:
            vals = np.array(
                [float(e.subs(T, t)) for e in self.sym], dtype=float)
            return vals.reshape(self.shape)
        rows, cols = self.sym.shape
        out = np.empty(self.shape + grid.shape)
        for i in range(rows):
            for j in range(cols):
                entry = eval_expr(self.sym[i, j], grid, t)
                if self._vector:
                    out[i] = entry
                else:
                    out[i, j] = entry
        return out

    def dt(self, n=1):
        return SymbolicField(self.sym.diff(T, n), vector=self._vector)

    def dx(self, axis, n=1):
        return SymbolicField(self.sym.diff(_SPACE[axis], n), vector=self._vector)

    def subs_t(self, t0) -> sp.ImmutableDenseMatrix:
        """Freeze time: the purely spatial matrix at t = t0."""
        return self.sym.subs(T, t0)


class ConstantField(FieldDescriptor):
    """Space- and time-constant matrix or vector."""

    has_exact_derivatives = True
    is_static = True

    def __init__(self, values: np.ndarray):
        self.values = np.asarray(values, dtype=float)
        self.shape = self.values.shape

    def at(self, t, grid):
        return self.values

    def dt(self, n=1):
        return self if n == 0 else ConstantField(np.zeros_like(self.values))

    def dx(self, axis, n=1):
        return self if n == 0 else ConstantField(np.zeros_like(self.values))

    @property
    def sym(self) -> sp.ImmutableDenseMatrix:
        if self.values.ndim == 1:
            return sp.ImmutableDenseMatrix(self.values.reshape(-1, 1))
        return sp.ImmutableDenseMatrix(self.values)


class SampledField(FieldDescriptor):
    """Time-independent field sampled on the grid; derivatives by stencil."""

    has_exact_derivatives = False
    is_static = True

    def __init__(self, values: np.ndarray, grid: Grid, comp_ndim: int):
        values = np.asarray(values, dtype=float)
        if values.shape[comp_ndim:] != grid.shape:
            raise ValueError("trailing axes must match the grid")
        self.values = values
        self.grid = grid
        self.shape = values.shape[:comp_ndim]

    def at(self, t, grid):
        if grid.shape != self.grid.shape:
            raise ValueError("sampled field bound to a different grid")
        return self.values

    def dt(self, n=1):
        return self if n == 0 else SampledField(
            np.zeros_like(self.values), self.grid, len(self.shape))

    def dx(self, axis, n=1):
        out = self.values
        for _ in range(n):
            out = self.grid.deriv(out, axis)
        return SampledField(out, self.grid, len(self.shape))


class TimeSampledField(FieldDescriptor):
    """Field given at discrete times; time derivatives by centred differences."""

    has_exact_derivatives = False
    is_static = False

    def __init__(self, times, values, grid: Grid, comp_ndim: int, dt_order: int = 0):
        self.times = np.asarray(times, dtype=float)
        self.values = np.asarray(values, dtype=float)
        if len(self.times) < 3:
            raise ValueError("need at least 3 time samples")
        self.grid = grid
        self.shape = self.values.shape[1:1 + comp_ndim]
        self._comp_ndim = comp_ndim
        self._dt_order = dt_order

    def _index(self, t):
        k = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[k] - t) > 1e-10 * max(1.0, abs(t)):
            raise ValueError("time %r is not a sample point" % t)
        return k

    def at(self, t, grid):
        vals, times = self.values, self.times
        for _ in range(self._dt_order):
            dt = times[1] - times[0]
            der = np.empty_like(vals)
            der[1:-1] = (vals[2:] - vals[:-2]) / (2 * dt)
            der[0] = (-3 * vals[0] + 4 * vals[1] - vals[2]) / (2 * dt)
            der[-1] = (3 * vals[-1] - 4 * vals[-2] + vals[-3]) / (2 * dt)
            vals = der
        return vals[self._index(t)]

    def dt(self, n=1):
        return TimeSampledField(self.times, self.values, self.grid,
                                self._comp_ndim, self._dt_order + n)

    def dx(self, axis, n=1):
        out = self.values
        for _ in range(n):
            out = self.grid.deriv(out, axis)
        return TimeSampledField(self.times, out, self.grid,
                                self._comp_ndim, self._dt_order)


def as_field(obj, shape, grid: Grid | None = None) -> FieldDescriptor:
    """Coerce expressions / numbers / arrays into a FieldDescriptor."""
    if isinstance(obj, FieldDescriptor):
        return obj
    if isinstance(obj, np.ndarray):
        if obj.shape == tuple(shape):
            return ConstantField(obj)
        if grid is None:
            raise ValueError("grid required for sampled arrays")
        return SampledField(obj, grid, len(shape))
    if len(shape) == 1:
        return SymbolicField(parse_vector(obj, shape[0]), vector=True)
    return SymbolicField(parse_matrix(obj, tuple(shape)))


def on_grid(values, comp_shape, grid_shape) -> np.ndarray:
    """Broadcast a field sample to (comp_shape, grid_shape), writable."""
    comp_shape = tuple(comp_shape)
    grid_shape = tuple(grid_shape)
    values = np.asarray(values, dtype=float)
    if values.shape == comp_shape + grid_shape:
        return values
    if values.shape == comp_shape:
        values = values.reshape(comp_shape + (1,) * len(grid_shape))
    return np.ascontiguousarray(
        np.broadcast_to(values, comp_shape + grid_shape))


def matvec(a: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Nodewise matrix-vector product; `a` is (r,c) or (r,c,grid...)."""
    if a.ndim == 2:
        return np.tensordot(a, u, axes=([1], [0]))
    return np.einsum("ij...,j...->i...", a, u)
