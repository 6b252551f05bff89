"""Energy-stable evolution of the half-space problem with a PEC wall.

Classic RK4 over 2nd-order centred differences on the collocated grid
(one-sided at the two x3 walls, periodic wrap tangentially).  The
tangential electric components are forced to zero on both wall planes
after every stage; a collocated scheme is used instead of a staggered
one because time-varying full-matrix A0 and D couple all six components
pointwise.  Inhomogeneous boundary data enters through a wall-supported
lift: u = w + lift(g) with w evolved homogeneously.

Besides the state itself the loop can track the charge density

    rho(t) = div(eps(t0) E0) - int_{t0}^t div(sigma E + J) ds,

the discrete energy integral u^T A0 u, divergence residuals, the wall
trace of the normal magnetic flux, and the time-integrated divergence
traces needed to reconstruct the normal derivative.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import sympy as sp

from .divergence import lambda_trace_pair, weighted_gradient_traces
from .fields import (ConstantField, FieldDescriptor, SymbolicField, X3,
                     matvec, on_grid)
from .grid import Grid
from .materials import CoefficientSet

__all__ = [
    "CflViolation", "NonFiniteField", "FieldState", "RunRecord",
    "cfl_timestep", "step", "run", "update_charge",
    "divergence_residuals", "wall_condition_residual", "boundary_flux",
    "build_boundary_lift",
]


class CflViolation(RuntimeError):
    """Requested time step exceeds the stability bound."""


class NonFiniteField(RuntimeError):
    """NaN or Inf appeared in the state."""


@dataclass
class FieldState:
    """Six-component state at one time plus the tracked charge density."""

    u: np.ndarray
    t: float
    rho: np.ndarray | None = None


@dataclass
class RunRecord:
    """Per-run series and snapshots (sampled every `stride` steps)."""

    grid: Grid
    dt: float
    steps: int
    stride: int
    times: np.ndarray = None
    energy: np.ndarray = None
    div_residuals: np.ndarray = None     # (n, 2): r1, r2
    wall_residual: np.ndarray = None
    flux: np.ndarray = None
    snapshot_times: np.ndarray = None
    snapshots: list = field(default_factory=list)
    rho_final: np.ndarray | None = None
    recovery_history: np.ndarray | None = None  # (2, grid) at final time
    final: FieldState | None = None

    def series_columns(self):
        return np.column_stack([
            self.times, self.energy, self.div_residuals[:, 0],
            self.div_residuals[:, 1], self.wall_residual, self.flux])


def _pec_project(u: np.ndarray) -> np.ndarray:
    """Zero the tangential electric components on both wall planes."""
    u[0, :, :, 0] = 0.0
    u[1, :, :, 0] = 0.0
    u[0, :, :, -1] = 0.0
    u[1, :, :, -1] = 0.0
    return u


def cfl_timestep(coeffs: CoefficientSet, cfl: float = 0.4) -> float:
    """Stability bound cfl * h * (min eig A0) / (max ||A_j||)."""
    h = min(coeffs.grid.hx, coeffs.grid.hy, coeffs.grid.hz)
    bound = coeffs.spatial_norm_bound()
    low = coeffs.min_eig_a0(0.0)
    return cfl * h * low / bound


class _Stepper:
    """Precomputed pieces for the RK4 right-hand side."""

    def __init__(self, coeffs: CoefficientSet, f_desc: FieldDescriptor,
                 lift: "_Lift | None" = None):
        self.coeffs = coeffs
        self.grid = coeffs.grid
        self.f = f_desc
        self.lift = lift
        self.a0_identity = coeffs.a0_is_identity()
        self.d_zero = coeffs.d_is_zero()
        self.f_zero = _is_zero_field(f_desc)
        self.spatial = [coeffs.spatial_at(j) for j in range(3)]

    def rhs(self, t: float, w: np.ndarray) -> np.ndarray:
        g = self.grid
        out = np.zeros_like(w)
        if not self.f_zero:
            out += on_grid(self.f.at(t, g), (6,), g.shape)
        if self.lift is not None:
            out += self.lift.forcing(t, self.coeffs)
        out -= matvec(self.spatial[0], g.d1(w))
        out -= matvec(self.spatial[1], g.d2(w))
        out -= matvec(self.spatial[2], g.d3(w))
        if not self.d_zero:
            out -= matvec(self.coeffs.d_at(t), w)
        if not self.a0_identity:
            out = matvec(self.coeffs.a0_inv_at(t), out)
        return out

    def rk4(self, t: float, w: np.ndarray, dt: float) -> np.ndarray:
        k1 = self.rhs(t, w)
        k2 = self.rhs(t + dt / 2, _pec_project(w + (dt / 2) * k1))
        k3 = self.rhs(t + dt / 2, _pec_project(w + (dt / 2) * k2))
        k4 = self.rhs(t + dt, _pec_project(w + dt * k3))
        return _pec_project(w + (dt / 6) * (k1 + 2 * k2 + 2 * k3 + k4))


def _is_zero_field(desc: FieldDescriptor) -> bool:
    if isinstance(desc, ConstantField):
        return not np.any(desc.values)
    if isinstance(desc, SymbolicField):
        return all(e == 0 for e in desc.sym)
    return False


class _Lift:
    """Wall-supported carrier of inhomogeneous boundary data.

    With boundary rows (u2, -u1) = g the lift sets u1 = -g2 c(x3),
    u2 = g1 c(x3) with a smooth cutoff c (c(0) = 1, vanishing before
    the cap), all other components zero.
    """

    def __init__(self, g_desc: SymbolicField, grid: Grid):
        if not isinstance(g_desc, (SymbolicField, ConstantField)):
            raise ValueError("boundary lift requires closed-form g")
        z0 = sp.Float(grid.lz / 4)
        z1 = sp.Float(3 * grid.lz / 4)
        s = (X3 - z0) / (z1 - z0)
        smooth = 1 - s ** 4 * (35 - 84 * s + 70 * s ** 2 - 20 * s ** 3)
        cut = sp.Piecewise((1, X3 <= z0), (smooth, X3 < z1), (0, True))
        gs = g_desc.sym
        vec = sp.ImmutableDenseMatrix(
            [-gs[1] * cut, gs[0] * cut, 0, 0, 0, 0])
        self.field = SymbolicField(vec, vector=True)
        self.grid = grid

    def value(self, t: float) -> np.ndarray:
        return on_grid(self.field.at(t, self.grid), (6,),
                       self.grid.shape)

    def forcing(self, t: float, coeffs: CoefficientSet) -> np.ndarray:
        """-L(lift) at time t (exact lift derivatives), added to f."""
        g = self.grid

        def ev(desc):
            return on_grid(desc.at(t, g), (6,), g.shape)

        out = -matvec(coeffs.a0_at(t), ev(self.field.dt()))
        for j in range(3):
            out -= matvec(coeffs.spatial_at(j), ev(self.field.dx(j)))
        if not coeffs.d_is_zero():
            out -= matvec(coeffs.d_at(t), ev(self.field))
        return out


def step(state: FieldState, coeffs: CoefficientSet, f_desc, dt: float,
         cfl: float = 0.4) -> FieldState:
    """One explicit RK4 step of the homogeneous-boundary problem."""
    bound = cfl_timestep(coeffs, cfl)
    if dt > bound * (1 + 1e-12):
        raise CflViolation(f"dt = {dt:.3e} exceeds the bound {bound:.3e}")
    stepper = _Stepper(coeffs, f_desc)
    u = stepper.rk4(state.t, _pec_project(state.u.copy()), dt)
    if not np.isfinite(u).all():
        raise NonFiniteField(f"non-finite state after step at t = {state.t}")
    return FieldState(u=u, t=state.t + dt, rho=state.rho)


def update_charge(rho: np.ndarray, e_prev: np.ndarray, e_next: np.ndarray,
                  sigma_prev: np.ndarray, sigma_next: np.ndarray,
                  j_prev: np.ndarray, j_next: np.ndarray, dt: float,
                  grid: Grid) -> np.ndarray:
    """Trapezoidal step of rho(t) -= int div(sigma E + J)."""
    div_prev = _div3(matvec(sigma_prev, e_prev) + j_prev, grid)
    div_next = _div3(matvec(sigma_next, e_next) + j_next, grid)
    return rho - 0.5 * dt * (div_prev + div_next)


def _div3(v: np.ndarray, grid: Grid) -> np.ndarray:
    return grid.d1(v[0]) + grid.d2(v[1]) + grid.d3(v[2])


def divergence_residuals(u: np.ndarray, rho: np.ndarray,
                         coeffs: CoefficientSet, t: float):
    """(||div(eps E) - rho||, ||div(mu H)||) in L2 over the slab."""
    grid = coeffs.grid
    a0u = matvec(coeffs.a0_at(t), u)
    r1 = grid.norm_l2(_div3(a0u[:3], grid) - rho)
    r2 = grid.norm_l2(_div3(a0u[3:], grid))
    return float(r1), float(r2)


def wall_condition_residual(u: np.ndarray, coeffs: CoefficientSet,
                            t: float) -> float:
    """L2(wall) norm of the normal magnetic flux (mu H) . nu at x3 = 0."""
    a0u_n = matvec(coeffs.a0_at(t), u)[5, :, :, 0]
    return float(coeffs.grid.wall_norm_l2(a0u_n))


def boundary_flux(u: np.ndarray, coeffs: CoefficientSet) -> float:
    """Energy flux through the two walls: int u^T A3 u (wall - cap)."""
    grid = coeffs.grid
    a3u = matvec(coeffs.spatial_at(2), u)
    dens = np.sum(u * a3u, axis=0)
    return float(grid.hx * grid.hy * (dens[:, :, 0].sum()
                                      - dens[:, :, -1].sum()))


def energy(u: np.ndarray, coeffs: CoefficientSet, t: float) -> float:
    """Discrete energy integral u^T A0 u over the slab."""
    dens = np.sum(u * matvec(coeffs.a0_at(t), u), axis=0)
    return coeffs.grid.integrate(dens)


def build_boundary_lift(g_desc, grid: Grid) -> _Lift | None:
    if g_desc is None or _is_zero_field(g_desc):
        return None
    if isinstance(g_desc, ConstantField):
        g_desc = SymbolicField(g_desc.sym, vector=True)
    return _Lift(g_desc, grid)


def run(coeffs: CoefficientSet, f_desc, g_desc, u0, t0: float, t_end: float,
        cfl: float = 0.4, stride: int = 1, sigma_desc=None,
        track_recovery: bool = False, record_snapshots: bool = True,
        dt: float | None = None) -> RunRecord:
    """Evolve from t0 to t_end recording series every `stride` steps.

    u0 may be a descriptor, a (6, grid) array, or a corrected initial
    datum; g enters through the wall lift.  sigma_desc (3x3) activates
    charge tracking; track_recovery accumulates the time integral of
    the divergence traces.
    """
    grid = coeffs.grid
    bound = cfl_timestep(coeffs, cfl)
    if dt is None:
        steps = max(int(np.ceil((t_end - t0) / bound)), 1)
        dt = (t_end - t0) / steps
    else:
        if dt > bound * (1 + 1e-12):
            raise CflViolation(f"dt = {dt:.3e} exceeds bound {bound:.3e}")
        steps = max(int(round((t_end - t0) / dt)), 1)
        dt = (t_end - t0) / steps

    if isinstance(u0, FieldDescriptor):
        # fresh copy: the state is projected and stepped in place
        u_init = np.array(on_grid(u0.at(t0, grid), (6,), grid.shape))
    elif hasattr(u0, "at"):  # CorrectedInitial
        u_init = np.array(u0.at(t0, grid), dtype=float)
    else:
        u_init = np.array(u0, dtype=float)

    lift = build_boundary_lift(g_desc, grid)
    if lift is not None:
        w = _pec_project(u_init - lift.value(t0))
    else:
        w = _pec_project(u_init)

    stepper = _Stepper(coeffs, f_desc, lift)

    def assemble(t, w_arr):
        return w_arr + lift.value(t) if lift is not None else w_arr

    # charge tracking
    track_charge = sigma_desc is not None or not _is_zero_field(f_desc)
    u_now = assemble(t0, w)
    rho = _div3(matvec(coeffs.a0_at(t0), u_now)[:3], grid)

    def sigma_at(t):
        if sigma_desc is None:
            return None
        return sigma_desc.at(t, grid)

    def current_at(t):
        # f = (-J, 0): the current density is the negated electric rows
        return -on_grid(f_desc.at(t, grid), (6,), grid.shape)[:3]

    # recovery history: initial divergence traces of mu~^T A0 grad u
    hist = None
    lam_prev = None
    if track_recovery:
        hist = weighted_gradient_traces(coeffs, u_now, t0)
        lam_prev = lambda_trace_pair(coeffs, u_now, f_desc, t0)

    n_rec = steps // stride + 1
    times = np.empty(n_rec)
    energies = np.empty(n_rec)
    div_res = np.empty((n_rec, 2))
    wall_res = np.empty(n_rec)
    fluxes = np.empty(n_rec)
    snaps = []
    snap_times = []

    def record(k, t, w_arr):
        u_full = assemble(t, w_arr)
        times[k] = t
        energies[k] = energy(u_full, coeffs, t)
        div_res[k] = divergence_residuals(u_full, rho, coeffs, t)
        wall_res[k] = wall_condition_residual(u_full, coeffs, t)
        fluxes[k] = boundary_flux(u_full, coeffs)
        if record_snapshots:
            snaps.append(u_full.copy())
            snap_times.append(t)

    record(0, t0, w)
    rec_idx = 1
    t = t0
    for n in range(steps):
        if track_charge:
            e_prev = assemble(t, w)[:3]
        w = stepper.rk4(t, w, dt)
        t_next = t0 + (n + 1) * dt
        if not np.isfinite(w).all():
            raise NonFiniteField(f"non-finite state at t = {t_next:.6g}")
        if track_charge:
            u_next = assemble(t_next, w)
            sig_p, sig_n = sigma_at(t), sigma_at(t_next)
            if sig_p is not None or np.any(current_at(t)):
                zero_sig = np.zeros((3, 3))
                rho = update_charge(
                    rho, e_prev, u_next[:3],
                    sig_p if sig_p is not None else zero_sig,
                    sig_n if sig_n is not None else zero_sig,
                    current_at(t), current_at(t_next), dt, grid)
        if track_recovery:
            lam_next = lambda_trace_pair(coeffs, assemble(t_next, w),
                                         f_desc, t_next)
            hist = hist + 0.5 * dt * (lam_prev + lam_next)
            lam_prev = lam_next
        t = t_next
        if (n + 1) % stride == 0:
            record(rec_idx, t, w)
            rec_idx += 1

    u_final = assemble(t, w)
    return RunRecord(
        grid=grid, dt=dt, steps=steps, stride=stride,
        times=times[:rec_idx], energy=energies[:rec_idx],
        div_residuals=div_res[:rec_idx], wall_residual=wall_res[:rec_idx],
        flux=fluxes[:rec_idx],
        snapshot_times=np.array(snap_times), snapshots=snaps,
        rho_final=rho, recovery_history=hist,
        final=FieldState(u=u_final, t=t, rho=rho),
    )
