"""Collocated half-space grid and discrete calculus.

The computational domain is the slab [0,Lx) x [0,Ly) x [0,Lz]: periodic
in the tangential directions x1, x2, and walled at x3 = 0 (the
perfectly conducting wall) and x3 = Lz (a truncation cap).  Derivatives
are 2nd-order centred in the interior with 2nd-order one-sided stencils
on the two wall planes; L2 quadrature is trapezoidal in x3 and exact
(uniform-weight) in the periodic directions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["Grid", "spatial_multi_indices"]

# spatial multi-indices by total order, used for discrete Sobolev norms
def spatial_multi_indices(order: int):
    """All (a1,a2,a3) with 1 <= a1+a2+a3 <= order."""
    out = []
    for total in range(1, order + 1):
        for a1 in range(total + 1):
            for a2 in range(total - a1 + 1):
                out.append((a1, a2, total - a1 - a2))
    return out


@dataclass(frozen=True)
class Grid:
    """Uniform tensor grid with a PEC wall at x3 = 0.

    nx, ny are periodic node counts (no duplicated endpoint); nz counts
    the x3 planes including both walls, so hz = lz / (nz - 1).
    """

    lx: float
    ly: float
    lz: float
    nx: int
    ny: int
    nz: int

    def __post_init__(self):
        if self.nz < 4:
            raise ValueError("nz >= 4 required for the wall stencils")
        if min(self.nx, self.ny) < 3:
            raise ValueError("nx, ny >= 3 required for periodic stencils")
        if min(self.lx, self.ly, self.lz) <= 0:
            raise ValueError("domain lengths must be positive")

    @property
    def shape(self):
        return (self.nx, self.ny, self.nz)

    @property
    def hx(self) -> float:
        return self.lx / self.nx

    @property
    def hy(self) -> float:
        return self.ly / self.ny

    @property
    def hz(self) -> float:
        return self.lz / (self.nz - 1)

    @property
    def h_max(self) -> float:
        return max(self.hx, self.hy, self.hz)

    def axes(self):
        """1D coordinate arrays (x1, x2, x3)."""
        x1 = np.arange(self.nx) * self.hx
        x2 = np.arange(self.ny) * self.hy
        x3 = np.arange(self.nz) * self.hz
        return x1, x2, x3

    def meshes(self):
        """Broadcastable coordinate meshes shaped (nx,1,1), (1,ny,1), (1,1,nz)."""
        x1, x2, x3 = self.axes()
        return (
            x1.reshape(-1, 1, 1),
            x2.reshape(1, -1, 1),
            x3.reshape(1, 1, -1),
        )

    def refine(self) -> "Grid":
        """Halve all spacings (periodic counts double, plane count 2n-1)."""
        return Grid(self.lx, self.ly, self.lz,
                    2 * self.nx, 2 * self.ny, 2 * self.nz - 1)

    # -- discrete derivatives ------------------------------------------------

    def d1(self, u: np.ndarray) -> np.ndarray:
        """Centred d/dx1 with periodic wrap (axis -3)."""
        return (np.roll(u, -1, axis=-3) - np.roll(u, 1, axis=-3)) / (2 * self.hx)

    def d2(self, u: np.ndarray) -> np.ndarray:
        """Centred d/dx2 with periodic wrap (axis -2)."""
        return (np.roll(u, -1, axis=-2) - np.roll(u, 1, axis=-2)) / (2 * self.hy)

    def d3(self, u: np.ndarray) -> np.ndarray:
        """d/dx3: centred inside, 2nd-order one-sided on the wall planes."""
        out = np.empty_like(u)
        h = self.hz
        out[..., 1:-1] = (u[..., 2:] - u[..., :-2]) / (2 * h)
        out[..., 0] = (-3 * u[..., 0] + 4 * u[..., 1] - u[..., 2]) / (2 * h)
        out[..., -1] = (3 * u[..., -1] - 4 * u[..., -2] + u[..., -3]) / (2 * h)
        return out

    def deriv(self, u: np.ndarray, axis: int) -> np.ndarray:
        return (self.d1, self.d2, self.d3)[axis](u)

    def deriv_multi(self, u: np.ndarray, alpha) -> np.ndarray:
        """Apply the mixed derivative d^alpha, alpha = (a1, a2, a3)."""
        out = u
        for axis, count in enumerate(alpha):
            for _ in range(count):
                out = self.deriv(out, axis)
        return out

    def gradient(self, u: np.ndarray) -> np.ndarray:
        """Stack (d1 u, d2 u, d3 u) along a new leading axis."""
        return np.stack([self.d1(u), self.d2(u), self.d3(u)])

    # -- quadrature ------------------------------------------------------------

    def quad_weights_x3(self) -> np.ndarray:
        w = np.full(self.nz, self.hz)
        w[0] = w[-1] = 0.5 * self.hz
        return w

    @property
    def cell_volume(self) -> float:
        return self.hx * self.hy * self.hz

    def integrate(self, u: np.ndarray) -> float:
        """Trapezoid-in-x3 integral over the slab (leading axes summed too)."""
        w = self.quad_weights_x3()
        return float(self.hx * self.hy * np.sum(u * w))

    def norm_l2(self, u: np.ndarray) -> float:
        """L2 norm over the slab; leading axes are summed as components."""
        w = self.quad_weights_x3()
        return float(np.sqrt(self.hx * self.hy * np.sum(np.abs(u) ** 2 * w)))

    def norm_hm(self, u: np.ndarray, order: int) -> float:
        """Discrete H^order norm (all spatial derivatives up to order)."""
        total = self.norm_l2(u) ** 2
        for alpha in spatial_multi_indices(order):
            total += self.norm_l2(self.deriv_multi(u, alpha)) ** 2
        return float(np.sqrt(total))

    # -- wall plane -------------------------------------------------------------

    def wall_norm_l2(self, v: np.ndarray) -> float:
        """L2 norm over the wall plane x3 = 0 of a (…, nx, ny) field."""
        return float(np.sqrt(self.hx * self.hy * np.sum(np.abs(v) ** 2)))

    def wall_axes(self):
        x1, x2, _ = self.axes()
        return x1.reshape(-1, 1), x2.reshape(1, -1)

    def tangential_wavenumbers(self):
        """Angular wavenumbers (xi1, xi2) matching numpy's fft2 layout."""
        xi1 = 2 * np.pi * np.fft.fftfreq(self.nx, d=self.hx)
        xi2 = 2 * np.pi * np.fft.fftfreq(self.ny, d=self.hy)
        return xi1.reshape(-1, 1), xi2.reshape(1, -1)
