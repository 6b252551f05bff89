"""Discrete function-space norms for fields, runs, and boundary data.

Three families matter for the energy estimates:

  * time-weighted solution norms: max over j <= m and t of
    e^{-gamma t} ||d_t^j u(t)||_{H^{m-j}},
  * boundary-data norms combining d_t^j with the fractional tangential
    Sobolev index m + 1/2 - j (computed by 2D FFT multiplier on the
    periodic wall plane),
  * delta-weighted tangential norms with Fourier weight
    (1 + |xi|^2)^{s+1} (1 + |delta xi|^2)^{-1}.

Time derivatives use exact expressions when the data is closed-form and
2nd-order differences on stored snapshot series otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .fields import FieldDescriptor, on_grid
from .grid import Grid

__all__ = [
    "GridSeries", "NormReport",
    "gm_norm", "em_norm", "weighted_tangential_norm",
    "boundary_sobolev_norm", "ha_norm", "tangential_sobolev_seminorms",
    "l2_norm_fft",
]


@dataclass
class GridSeries:
    """Uniformly sampled time series of grid (or wall-plane) fields."""

    times: np.ndarray
    values: np.ndarray  # (nt, comp..., space...)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if len(self.times) != self.values.shape[0]:
            raise ValueError("times/values length mismatch")
        if len(self.times) >= 3:
            dts = np.diff(self.times)
            if np.abs(dts - dts[0]).max() > 1e-9 * max(abs(dts[0]), 1e-30):
                raise ValueError("time samples must be uniform")

    @classmethod
    def sample(cls, f: FieldDescriptor, times, grid: Grid) -> "GridSeries":
        times = np.asarray(times, dtype=float)
        vals = np.stack([on_grid(f.at(t, grid), f.shape, grid.shape)
                         for t in times])
        return cls(times, vals)

    def deriv_t(self) -> "GridSeries":
        """2nd-order time derivative series (one-sided at the ends)."""
        if len(self.times) < 3:
            raise ValueError("need at least 3 samples to differentiate")
        dt = self.times[1] - self.times[0]
        v = self.values
        out = np.empty_like(v)
        out[1:-1] = (v[2:] - v[:-2]) / (2 * dt)
        out[0] = (-3 * v[0] + 4 * v[1] - v[2]) / (2 * dt)
        out[-1] = (3 * v[-1] - 4 * v[-2] + v[-3]) / (2 * dt)
        return GridSeries(self.times, out)


def _time_derivative_chain(u, m: int, times, grid: Grid):
    """[u, d_t u, ..., d_t^m u] as GridSeries; exact for descriptors."""
    if isinstance(u, FieldDescriptor):
        return [GridSeries.sample(u.dt(j) if j else u, times, grid)
                for j in range(m + 1)]
    series = [u]
    for _ in range(m):
        series.append(series[-1].deriv_t())
    return series


def gm_norm(u, m: int, gamma: float, grid: Grid, times=None) -> float:
    """Time-weighted solution norm of order m.

    u is a GridSeries of (comp..., nx, ny, nz) snapshots or a closed-form
    FieldDescriptor (`times` then supplies the evaluation samples).
    """
    if m > 3:
        raise ValueError("orders above 3 are not supported")
    if isinstance(u, FieldDescriptor) and times is None:
        raise ValueError("times required when u is a descriptor")
    chain = _time_derivative_chain(
        u, m, times if times is not None else getattr(u, "times", None), grid)
    tgrid = chain[0].times
    value = 0.0
    for j in range(m + 1):
        for k, t in enumerate(tgrid):
            value = max(value, np.exp(-gamma * t)
                        * grid.norm_hm(chain[j].values[k], m - j))
    return float(value)


def boundary_sobolev_norm(v: np.ndarray, s: float, grid: Grid) -> float:
    """Fractional H^s norm on the periodic wall plane via FFT multiplier.

    v has shape (comp..., nx, ny); the multiplier is (1 + |xi|^2)^{s/2}.
    """
    xi1, xi2 = grid.tangential_wavenumbers()
    mult = (1.0 + xi1 ** 2 + xi2 ** 2) ** s
    vhat = np.fft.fft2(v, axes=(-2, -1))
    total = np.sum(mult * np.abs(vhat) ** 2)
    return float(np.sqrt(grid.hx * grid.hy * total / (grid.nx * grid.ny)))


def em_norm(g, m: int, gamma: float, grid: Grid, times=None) -> float:
    """Boundary-data norm: max_j of the weighted L2-in-time of the
    H^{m + 1/2 - j} wall norm of d_t^j g."""
    if m > 3:
        raise ValueError("orders above 3 are not supported")
    chain = _time_derivative_chain(
        g, m, times if times is not None else getattr(g, "times", None), grid)
    if chain[0].values.ndim == 5:
        # descriptor sampled on the slab: restrict to the wall plane
        chain = [GridSeries(c.times, c.values[..., 0]) for c in chain]
    tgrid = chain[0].times
    if len(tgrid) < 2:
        raise ValueError("need at least two time samples")
    wt = np.full(len(tgrid), tgrid[1] - tgrid[0])
    wt[0] *= 0.5
    wt[-1] *= 0.5
    value = 0.0
    for j in range(m + 1):
        s = m + 0.5 - j
        sq = sum(w * np.exp(-2 * gamma * t)
                 * boundary_sobolev_norm(chain[j].values[k], s, grid) ** 2
                 for k, (t, w) in enumerate(zip(tgrid, wt)))
        value = max(value, float(np.sqrt(sq)))
    return value


def _weighted_multiplier(grid: Grid, s: float, delta: float) -> np.ndarray:
    xi1, xi2 = grid.tangential_wavenumbers()
    xi2sq = xi1 ** 2 + xi2 ** 2
    return (1.0 + xi2sq) ** (s + 1) / (1.0 + delta ** 2 * xi2sq)


def weighted_tangential_norm(v: np.ndarray, s: float, delta: float,
                             grid: Grid) -> float:
    """Tangential norm with weight (1+|xi|^2)^{s+1} (1+|delta xi|^2)^{-1}.

    v is (comp..., nx, ny, nz); tangential FFT per x3 plane, trapezoid
    quadrature in x3.
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    mult = _weighted_multiplier(grid, s, delta)[..., None]
    vhat = np.fft.fft2(v, axes=(-3, -2))
    dens = np.sum(mult * np.abs(vhat) ** 2, axis=tuple(range(v.ndim - 1)))
    w3 = grid.quad_weights_x3()
    total = np.sum(dens * w3)
    return float(np.sqrt(grid.hx * grid.hy * total / (grid.nx * grid.ny)))


def tangential_spectral_derivative(v: np.ndarray, axis: int,
                                   grid: Grid) -> np.ndarray:
    """Spectral d/dx_axis (axis in {0,1}) of a tangentially periodic field.

    The Nyquist mode is zeroed on even grids (it has no well-defined
    derivative for real data).
    """
    xi1, xi2 = grid.tangential_wavenumbers()
    xi = (xi1, xi2)[axis].copy()
    n = (grid.nx, grid.ny)[axis]
    if n % 2 == 0:
        if axis == 0:
            xi[n // 2, :] = 0.0
        else:
            xi[:, n // 2] = 0.0
    vhat = np.fft.fft2(v, axes=(-3, -2))
    return np.real(np.fft.ifft2(1j * xi[..., None] * vhat, axes=(-3, -2)))


def l2_norm_fft(v: np.ndarray, grid: Grid) -> float:
    """L2 norm evaluated through the tangential FFT (Parseval route)."""
    vhat = np.fft.fft2(v, axes=(-3, -2))
    dens = np.sum(np.abs(vhat) ** 2, axis=tuple(range(v.ndim - 1)))
    total = np.sum(dens * grid.quad_weights_x3())
    return float(np.sqrt(grid.hx * grid.hy * total / (grid.nx * grid.ny)))


def ha_norm(u, m: int, gamma: float, grid: Grid, times=None) -> float:
    """Weighted space-time norm: sum over |alpha| <= m (alpha in N0^4) of
    the e^{-gamma t}-weighted L2(J x slab) norms of d^alpha u."""
    chain = _time_derivative_chain(
        u, m, times if times is not None else getattr(u, "times", None), grid)
    tgrid = chain[0].times
    wt = np.full(len(tgrid), tgrid[1] - tgrid[0])
    wt[0] *= 0.5
    wt[-1] *= 0.5
    total = 0.0
    for k_t in range(m + 1):
        vals = chain[k_t].values
        for k, (t, w) in enumerate(zip(tgrid, wt)):
            total += w * np.exp(-2 * gamma * t) \
                * grid.norm_hm(vals[k], m - k_t) ** 2
    return float(np.sqrt(total))


def tangential_sobolev_seminorms(u, m: int, gamma: float, grid: Grid,
                                 times=None):
    """Pieces of the tangential-regularity estimate for a run.

    Returns (sup_part, l2_part): the max over alpha (|alpha| <= m,
    alpha_3 = 0) of sup_t e^{-gamma t} ||d^alpha u(t)||_{L2}, squared and
    summed, and the weighted space-time L2 norm of those derivatives.
    """
    chain = _time_derivative_chain(
        u, m, times if times is not None else getattr(u, "times", None), grid)
    tgrid = chain[0].times
    wt = np.full(len(tgrid), tgrid[1] - tgrid[0])
    wt[0] *= 0.5
    wt[-1] *= 0.5
    sup_sq = 0.0
    l2_sq = 0.0
    for k_t in range(m + 1):
        for a1 in range(m - k_t + 1):
            for a2 in range(m - k_t - a1 + 1):
                best = 0.0
                acc = 0.0
                for k, (t, w) in enumerate(zip(tgrid, wt)):
                    v = chain[k_t].values[k]
                    for _ in range(a1):
                        v = grid.d1(v)
                    for _ in range(a2):
                        v = grid.d2(v)
                    nrm = grid.norm_l2(v)
                    best = max(best, np.exp(-gamma * t) * nrm)
                    acc += w * np.exp(-2 * gamma * t) * nrm ** 2
                sup_sq += best ** 2
                l2_sq += acc
    return float(sup_sq), float(np.sqrt(l2_sq))


@dataclass
class NormReport:
    """Norm values attached to one scenario/run, JSON-serializable."""

    gamma: float
    gm: float | None = None
    hm: float | None = None
    em: float | None = None
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {"gamma": self.gamma, "gm": self.gm, "hm": self.hm,
               "em": self.em}
        out.update(self.extra)
        return out
