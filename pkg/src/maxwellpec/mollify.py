"""Mollifiers and translation operators on the half-space slab.

Smoothing near the characteristic wall cannot cross x3 = 0, so the
normal-direction regularization first translates a field toward the
wall by delta and then convolves with a radial bump of width
epsilon < delta, restricting back to the slab.  Tangential smoothing
uses a compactly supported kernel whose Fourier transform vanishes to
prescribed order at 0 (built by applying the discrete tangential
Laplacian to a bump), applied as an FFT multiplier on the periodic
tangential axes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import oaconvolve

from .grid import Grid

__all__ = ["MollifierPair", "ScaleOrderError", "mollify_normal",
           "mollify_tangential", "chi_transfer", "translate_toward_wall"]


class ScaleOrderError(ValueError):
    """The smoothing scale must stay below the translation offset."""


def _bump(r2: np.ndarray) -> np.ndarray:
    """exp(-1/(1-r^2)) on r^2 < 1, zero outside (not normalized)."""
    out = np.zeros_like(r2)
    inside = r2 < 1.0
    out[inside] = np.exp(-1.0 / (1.0 - r2[inside]))
    return out


@dataclass(frozen=True)
class MollifierPair:
    """Scales and construction order for the two smoothing kernels.

    epsilon : width of the radial bump rho (3D, unit mass, support in
              the epsilon-ball)
    delta   : wall-ward translation offset, must exceed epsilon
    order   : required vanishing order of the tangential kernel's
              Fourier transform at 0 is order + 1
    """

    epsilon: float
    delta: float
    order: int = 1

    def __post_init__(self):
        if self.epsilon <= 0 or self.delta <= 0:
            raise ValueError("scales must be positive")

    @property
    def laplacian_power(self) -> int:
        # each discrete Laplacian contributes |xi|^2 at the origin
        return (self.order + 2) // 2

    def rho_stencil(self, grid: Grid) -> np.ndarray:
        """rho_epsilon sampled on grid offsets, normalized to unit mass."""
        rx = max(int(np.ceil(self.epsilon / grid.hx)) - 1, 0)
        ry = max(int(np.ceil(self.epsilon / grid.hy)) - 1, 0)
        rz = max(int(np.ceil(self.epsilon / grid.hz)) - 1, 0)
        o1 = (np.arange(-rx, rx + 1) * grid.hx).reshape(-1, 1, 1)
        o2 = (np.arange(-ry, ry + 1) * grid.hy).reshape(1, -1, 1)
        o3 = (np.arange(-rz, rz + 1) * grid.hz).reshape(1, 1, -1)
        r2 = (o1 ** 2 + o2 ** 2 + o3 ** 2) / self.epsilon ** 2
        w = _bump(r2)
        return w / w.sum()


def translate_toward_wall(v: np.ndarray, delta: float,
                          grid: Grid) -> np.ndarray:
    """T_delta v(x) = v(x1, x2, x3 + delta) on the slab.

    delta must be a multiple of hz; values needed beyond the cap are
    continued constantly.
    """
    k = delta / grid.hz
    ki = int(round(k))
    if abs(k - ki) > 1e-9 or ki < 0:
        raise ValueError("delta must be a nonnegative multiple of hz")
    if ki == 0:
        return v.copy()
    out = np.empty_like(v)
    out[..., :-ki] = v[..., ki:]
    out[..., -ki:] = v[..., -1:]
    return out


def mollify_normal(v: np.ndarray, pair: MollifierPair,
                   grid: Grid) -> np.ndarray:
    """Translate toward the wall by delta, convolve with rho_epsilon,
    restrict to the slab.  Requires epsilon < delta."""
    if pair.epsilon >= pair.delta:
        raise ScaleOrderError(
            f"epsilon = {pair.epsilon} must be smaller than delta = {pair.delta}")
    shifted = translate_toward_wall(v, pair.delta, grid)
    kern = pair.rho_stencil(grid)
    if kern.size == 1:
        return shifted
    rx, ry, rz = (s // 2 for s in kern.shape)
    flat = shifted.reshape((-1,) + shifted.shape[-3:])
    out = np.empty_like(flat)
    for c in range(flat.shape[0]):
        # constant continuation past the x3 ends, periodic wrap tangentially
        padded = np.pad(flat[c], ((0, 0), (0, 0), (rz, rz)), mode="edge")
        padded = np.pad(padded, ((rx, rx), (ry, ry), (0, 0)), mode="wrap")
        out[c] = oaconvolve(padded, kern, mode="valid")
    return out.reshape(shifted.shape)


def _tangential_offsets(grid: Grid):
    """Signed periodic offsets of each tangential node from the origin."""
    x1, x2, _ = grid.axes()
    o1 = np.where(x1 > grid.lx / 2, x1 - grid.lx, x1).reshape(-1, 1)
    o2 = np.where(x2 > grid.ly / 2, x2 - grid.ly, x2).reshape(1, -1)
    return o1, o2


def chi_kernel(eps: float, grid: Grid, order: int = 1) -> np.ndarray:
    """Tangential kernel chi_eps sampled on the periodic wall plane.

    Built as eps^{2q} Laplacian^q of the normalized bump of width eps,
    q = ceil((order + 1) / 2); the discrete Laplacian makes the kernel
    sum exactly zero, so constants are annihilated exactly.
    """
    if eps >= min(grid.lx, grid.ly) / 2:
        raise ValueError("kernel width exceeds half the tangential period")
    o1, o2 = _tangential_offsets(grid)
    b = _bump((o1 ** 2 + o2 ** 2) / eps ** 2)
    mass = b.sum() * grid.hx * grid.hy
    if mass <= 0:
        raise ValueError("kernel width is below grid resolution")
    b /= mass
    q = (order + 2) // 2
    out = b
    for _ in range(q):
        out = ((np.roll(out, -1, 0) - 2 * out + np.roll(out, 1, 0)) / grid.hx ** 2
               + (np.roll(out, -1, 1) - 2 * out + np.roll(out, 1, 1)) / grid.hy ** 2)
    return eps ** (2 * q) * out


def chi_transfer(eps: float, grid: Grid, order: int = 1) -> np.ndarray:
    """Fourier transfer function of chi_eps on the tangential grid."""
    return np.fft.fft2(chi_kernel(eps, grid, order)) * grid.hx * grid.hy


def mollify_tangential(v: np.ndarray, eps: float, grid: Grid,
                       order: int = 1) -> np.ndarray:
    """Tangential convolution with chi_eps via the FFT multiplier.

    v is a slab field shaped (..., nx, ny, nz); the convolution acts on
    the periodic axes only.
    """
    if v.shape[-3:-1] != (grid.nx, grid.ny):
        raise ValueError("expected a slab field (..., nx, ny, nz)")
    mult = chi_transfer(eps, grid, order)[..., None]
    vhat = np.fft.fft2(v, axes=(-3, -2))
    return np.real(np.fft.ifft2(vhat * mult, axes=(-3, -2)))
