"""Generalized divergence structure of the variable-coefficient system.

Spatial coefficients in the admissible class decompose nodewise as
A_j = sum_l A_l^co mu_lj.  Writing mu~ = blockdiag(mu, mu), the pair of
trace sums

    Div h = ( sum_k (mu~^T grad h)_{kk},  sum_k (mu~^T grad h)_{(k+3)k} )

annihilates the second-order part of the operator sum_j A_j d_j: both
trace sums of mu~^T sum_j A_j grad(d_j u) vanish identically thanks to
the antisymmetry of the Levi-Civita contraction.  That cancellation is
what lets the wall-normal derivative be recovered from tangential and
time derivatives: six rows come from the evolution equation itself and
two more from the time-integrated divergence identity, yielding an 8x6
system that Gaussian elimination (G2 G1) reduces to a 0/1 matrix.
"""

from __future__ import annotations

import numpy as np

from . import structure
from .fields import FieldDescriptor, matvec, on_grid
from .grid import Grid

__all__ = [
    "MuTilde", "NotInSpan", "InconsistentSystem", "decompose_mu",
    "generalized_div", "cancellation_residual", "cancellation_sweep",
    "RecoveryOperators", "recover_normal_derivative", "lambda_trace_pair",
    "weighted_gradient_traces",
]

_STRUCT = structure.build_structure_matrices()

# selector with ones at (0,4),(1,3),(3,1),(4,0),(6,2),(7,5): the reduced
# 8x6 system matrix in front of d3 u
MTILDE = np.zeros((8, 6))
for _r, _c in ((0, 4), (1, 3), (3, 1), (4, 0), (6, 2), (7, 5)):
    MTILDE[_r, _c] = 1.0


class NotInSpan(ValueError):
    """A spatial coefficient is not a combination of the curl matrices."""


class InconsistentSystem(RuntimeError):
    """The structurally-zero rows of the reduced system are too large."""


def _matmat(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Nodewise matrix product; either factor may be constant (2-d)."""
    if a.ndim == 2 and b.ndim == 2:
        return a @ b
    return np.einsum("ij...,jk...->ik...", a, b)


class MuTilde:
    """Span coordinates mu_lj of (A1, A2, A3) and the doubled matrix mu~."""

    def __init__(self, mu: np.ndarray):
        mu = np.asarray(mu, dtype=float)
        if mu.shape[:2] != (3, 3):
            raise ValueError("mu must be (3, 3) or (3, 3, grid...)")
        self.mu = mu

    @property
    def is_constant(self) -> bool:
        return self.mu.ndim == 2

    @property
    def mu_tilde(self) -> np.ndarray:
        out = np.zeros((6, 6) + self.mu.shape[2:])
        out[:3, :3] = self.mu
        out[3:, 3:] = self.mu
        return out

    def normalized_column(self, tol: float = 1e-12) -> bool:
        """True when the third column is e3 (the wall-normalized case)."""
        col = self.mu[:, 2]
        tgt = np.zeros_like(col)
        tgt[2] = 1.0
        return bool(np.abs(col - tgt).max() <= tol)


def decompose_mu(a1: np.ndarray, a2: np.ndarray, a3: np.ndarray,
                 tol: float = 1e-12) -> MuTilde:
    """Nodewise span coordinates of the spatial coefficients.

    The constant curl matrices are Frobenius-orthogonal with norm^2 = 4,
    so the fit is a plain projection; the reconstruction residual is
    asserted and NotInSpan raised when any A_j leaves the span.
    """
    mats = [np.asarray(a, dtype=float) for a in (a1, a2, a3)]
    grid_shape = ()
    for a in mats:
        if a.ndim > 2:
            grid_shape = a.shape[2:]
    mu = np.zeros((3, 3) + grid_shape)
    basis = _STRUCT.a  # (3, 6, 6)
    worst = 0.0
    scale = max(1.0, max(np.abs(a).max() for a in mats))
    for j, a in enumerate(mats):
        coeff = np.einsum("lpq,pq...->l...", basis, a) / 4.0
        recon = np.einsum("lpq,l...->pq...", basis, coeff)
        worst = max(worst, float(np.abs(recon - a).max()))
        if coeff.ndim == 1 and grid_shape:
            coeff = coeff.reshape((3,) + (1,) * len(grid_shape))
        mu[:, j] = coeff
    if worst > tol * scale:
        raise NotInSpan(
            f"span residual {worst:.3e} exceeds {tol:.1e} * scale")
    return MuTilde(mu)


def generalized_div(mu: MuTilde, h: np.ndarray, grid: Grid) -> np.ndarray:
    """The two trace sums of mu~^T grad h for a 6-vector field h.

    Returns a (2, grid) array; for mu = I this is (div h[0:3], div h[3:6]).
    """
    h = np.asarray(h, dtype=float)
    grad = grid.gradient(h)  # (3, 6, grid): grad[k, l] = d_k h_l
    m = mu.mu
    # first component: sum_{k,l} mu_{lk} d_k h_l, second the same on h[3:]
    first = np.einsum("lk...,kl...->...", m, grad[:, :3])
    second = np.einsum("lk...,kl...->...", m, grad[:, 3:])
    return np.stack([first, second])


def _hessian_of(u, grid: Grid, t: float = 0.0) -> np.ndarray:
    """Hessian H[p, k, j] = d_k d_j u_p, exact for closed forms."""
    if isinstance(u, FieldDescriptor):
        H = np.empty((6, 3, 3) + grid.shape)
        for k in range(3):
            for j in range(k, 3):
                val = on_grid(u.dx(k).dx(j).at(t, grid), (6,), grid.shape)
                H[:, k, j] = val
                H[:, j, k] = val
        return H
    u = np.asarray(u, dtype=float)
    H = np.empty((6, 3, 3) + grid.shape)
    for j in range(3):
        dju = grid.deriv(u, j)
        for k in range(3):
            H[:, k, j] = grid.deriv(dju, k)
    return H


def cancellation_residual(mu: MuTilde, coeffs, u, grid: Grid,
                          t: float = 0.0):
    """Sup-norms of the two trace sums of mu~^T sum_j A_j grad(d_j u).

    Both must vanish (to rounding for exact Hessians, to O(h^2) for
    differenced ones); this is the structural identity the normal
    recovery rests on.  `coeffs` provides the spatial coefficients, `u`
    is a 6-vector closed form or grid array.
    """
    H = _hessian_of(u, grid, t)
    mt = mu.mu_tilde
    traces = [np.zeros(grid.shape), np.zeros(grid.shape)]
    for j in range(3):
        a_j = coeffs.spatial_at(j) if hasattr(coeffs, "spatial_at") \
            else np.asarray(coeffs[j], dtype=float)
        m_j = _matmat(np.swapaxes(mt, 0, 1), a_j)  # (6, 6, ...)
        # contribution M_{row,p} H[p, k, j] with row = k and row = k + 3
        for k in range(3):
            traces[0] += np.einsum("p...,p...->...", m_j[k], H[:, k, j])
            traces[1] += np.einsum("p...,p...->...", m_j[k + 3], H[:, k, j])
    return float(np.abs(traces[0]).max()), float(np.abs(traces[1]).max())


def _monomial_hessians(grid: Grid, degree: int) -> np.ndarray:
    """Hessians of all monomials x^alpha, |alpha| <= degree, exactly.

    Returns (n_monomials, 3, 3, npts) for the flattened grid.
    """
    xs = np.stack(np.meshgrid(*grid.axes(), indexing="ij")).reshape(3, -1)
    alphas = [(a1, a2, a3)
              for total in range(degree + 1)
              for a1 in range(total + 1)
              for a2 in range(total - a1 + 1)
              for a3 in [total - a1 - a2]]

    def power(vals, e):
        return vals ** e if e > 0 else np.ones_like(vals)

    def d2(alpha, k, j):
        a = list(alpha)
        coef = a[k]
        if coef == 0:
            return np.zeros(xs.shape[1])
        a[k] -= 1
        coef *= a[j]
        if coef == 0:
            return np.zeros(xs.shape[1])
        a[j] -= 1
        out = float(coef) * np.ones(xs.shape[1])
        for ax in range(3):
            out *= power(xs[ax], a[ax])
        return out

    hess = np.empty((len(alphas), 3, 3, xs.shape[1]))
    for i, alpha in enumerate(alphas):
        for k in range(3):
            for j in range(3):
                hess[i, k, j] = d2(alpha, k, j)
    return hess


def cancellation_sweep(trials: int, seed: int, grid: Grid,
                       degree: int = 4) -> float:
    """Max cancellation residual over random constant mu and every
    polynomial field up to the given degree (checked monomial by
    monomial; the residual is linear in the Hessian)."""
    rng = np.random.default_rng(seed)
    hess = _monomial_hessians(grid, degree)  # (n, 3, 3, npts)
    basis = _STRUCT.a
    worst = 0.0
    for _ in range(trials):
        mu = rng.normal(size=(3, 3))
        mt = np.zeros((6, 6))
        mt[:3, :3] = mu
        mt[3:, 3:] = mu
        # coefficient tensors c[k, j, p] = (mu~^T A_j)_{row, p}
        a_js = [sum(basis[l] * mu[l, j] for l in range(3)) for j in range(3)]
        c_top = np.stack([(mt.T @ a_js[j])[:3] for j in range(3)], axis=1)
        c_bot = np.stack([(mt.T @ a_js[j])[3:] for j in range(3)], axis=1)
        # residual for u = monomial * e_p: sum_{k,j} c[k, j, p] H[k, j]
        for c in (c_top, c_bot):
            vals = np.einsum("kjp,nkjx->npx", c, hess)
            worst = max(worst, float(np.abs(vals).max()))
    return worst


class RecoveryOperators:
    """Elimination pair (G1, G2) reducing the 8x6 normal-derivative system.

    Rows 1..6 of the stacked system matrix are A3; rows 7, 8 are the
    rows 3 and 6 of mu~^T A0.  G1 clears rows 7, 8 against the first
    six; G2 applies the inverse of the 2x2 A0 submatrix on rows/cols
    {3, 6}.  The product with the stacked matrix is the 0/1 selector.
    """

    def __init__(self, a0: np.ndarray, mu: MuTilde, a3: np.ndarray | None = None,
                 eta: float = 0.0):
        self.a0 = np.asarray(a0, dtype=float)
        self.mu = mu
        self.a3 = _STRUCT.a3 if a3 is None else np.asarray(a3, dtype=float)
        mt = mu.mu_tilde
        self.mt_a0 = _matmat(np.swapaxes(mt, 0, 1), self.a0)  # (6, 6, ...)
        theta = np.stack([
            np.stack([self.a0[2, 2], self.a0[2, 5]]),
            np.stack([self.a0[5, 2], self.a0[5, 5]]),
        ])  # (2, 2, ...)
        det = theta[0, 0] * theta[1, 1] - theta[0, 1] * theta[1, 0]
        trace = theta[0, 0] + theta[1, 1]
        # min eigenvalue of the symmetric 2x2 block, nodewise
        disc = np.sqrt(np.maximum((trace / 2) ** 2 - det, 0.0))
        self.theta_min_eig = float(np.min(trace / 2 - disc))
        if eta > 0 and self.theta_min_eig < eta:
            raise ValueError(
                f"wall block loses definiteness: min eig "
                f"{self.theta_min_eig:.3e} < eta = {eta:.3e}")
        self.beta = np.stack([
            np.stack([theta[1, 1], -theta[0, 1]]),
            np.stack([-theta[1, 0], theta[0, 0]]),
        ]) / det

    def stacked_matrix(self) -> np.ndarray:
        """mu-hat: A3 stacked over rows 3 and 6 of mu~^T A0, (8, 6, ...)."""
        tg = self.mt_a0.shape[2:]
        out = np.empty((8, 6) + tg)
        out[:6] = self.a3.reshape((6, 6) + (1,) * len(tg))
        out[6] = self.mt_a0[2]
        out[7] = self.mt_a0[5]
        return out

    def apply_elimination(self, F: np.ndarray) -> np.ndarray:
        """G2 G1 F for an 8-row stack F (rows may carry grid axes)."""
        a = self.mt_a0[2]  # (6, ...)
        c = self.mt_a0[5]
        out = np.empty_like(F)
        out[0] = F[0]
        out[1] = -F[1]
        out[2] = F[2]
        out[3] = -F[3]
        out[4] = F[4]
        out[5] = F[5]
        row7 = (-a[4] * F[0] + a[3] * F[1] + a[1] * F[3] - a[0] * F[4] + F[6])
        row8 = (-c[4] * F[0] + c[3] * F[1] + c[1] * F[3] - c[0] * F[4] + F[7])
        out[6] = self.beta[0, 0] * row7 + self.beta[0, 1] * row8
        out[7] = self.beta[1, 0] * row7 + self.beta[1, 1] * row8
        return out

    def identity_residual(self) -> float:
        """sup | G2 G1 mu-hat - selector |, zero for admissible inputs."""
        reduced = self.apply_elimination(self.stacked_matrix())
        tg = reduced.shape[2:]
        return float(np.abs(
            reduced - MTILDE.reshape((8, 6) + (1,) * len(tg))).max())


def weighted_gradient_traces(coeffs, u: np.ndarray, t: float) -> np.ndarray:
    """The two trace sums of mu~^T A0 grad u at time t, shape (2, grid)."""
    grid = coeffs.grid
    mt = MuTilde(coeffs.mu_lj.at(t, grid)).mu_tilde
    mta0 = _matmat(np.swapaxes(mt, 0, 1), coeffs.a0_at(t))
    grad_u = grid.gradient(u)  # (3, 6, grid)
    prod = np.einsum("il...,kl...->ik...", mta0, grad_u) \
        if mta0.ndim > 2 else np.einsum("il,kl...->ik...", mta0, grad_u)
    return np.stack([prod[0, 0] + prod[1, 1] + prod[2, 2],
                     prod[3, 0] + prod[4, 1] + prod[5, 2]])


def lambda_trace_pair(coeffs, u: np.ndarray, f_desc, t: float) -> np.ndarray:
    """Trace pair of the first-order remainder in the divergence identity.

    Differentiating mu~^T A0 grad u in time and cancelling the
    second-order part leaves a sum of first-order terms; this evaluates
    its two trace sums on the grid (a (2, grid) array) for the state u
    at time t.
    """
    grid = coeffs.grid
    mu = MuTilde(coeffs.mu_lj.at(t, grid))
    mt = mu.mu_tilde
    mt_t = np.swapaxes(mt, 0, 1)

    a0 = coeffs.a0_at(t)
    d = coeffs.d_at(t)
    a0_inv = coeffs.a0_inv_at(t)
    grad_u = grid.gradient(u)  # (3, 6, grid)
    f_val = on_grid(f_desc.at(t, grid), (6,), grid.shape)

    # h = f - sum_j A_j d_j u - D u  (the A0 d_t u image)
    h = f_val.copy()
    for j in range(3):
        h -= matvec(coeffs.spatial_at(j), grad_u[j])
    if not coeffs.d_is_zero():
        h -= matvec(d, u)

    lam = np.zeros((6, 3) + grid.shape)

    if not coeffs.a0.is_static:
        dt_a0 = coeffs.a0.dt().at(t, grid)
        for k in range(3):
            lam[:, k] += matvec(_matmat(mt_t, dt_a0), grad_u[k])

    for k in range(3):
        da0_k = coeffs.a0.dx(k).at(t, grid)
        if np.any(da0_k):
            # d_k (A0^{-1}) = -A0^{-1} (d_k A0) A0^{-1}
            m_k = -_matmat(_matmat(a0_inv, da0_k), a0_inv)
            lam[:, k] += matvec(_matmat(mt_t, _matmat(a0, m_k)), h)
        df_k = on_grid(f_desc.dx(k).at(t, grid), (6,), grid.shape)
        lam[:, k] += matvec(mt_t, df_k)
        for j in range(2):
            daj = (coeffs.a1, coeffs.a2)[j].dx(k).at(t, grid)
            if np.any(daj):
                lam[:, k] -= matvec(_matmat(mt_t, daj), grad_u[j])
        dd_k = coeffs.d.dx(k).at(t, grid)
        if np.any(dd_k):
            lam[:, k] -= matvec(_matmat(mt_t, dd_k), u)
        if not coeffs.d_is_zero():
            lam[:, k] -= matvec(_matmat(mt_t, d), grad_u[k])

    first = lam[0, 0] + lam[1, 1] + lam[2, 2]
    second = lam[3, 0] + lam[4, 1] + lam[5, 2]
    return np.stack([first, second])


def recover_normal_derivative(coeffs, mu: MuTilde, u: np.ndarray,
                              u_t: np.ndarray, du1: np.ndarray,
                              du2: np.ndarray, f_val: np.ndarray,
                              history: np.ndarray, t: float,
                              tol: float | None = 1e-6):
    """Solve the reduced 8x6 system for d3 u at time t.

    history carries the initial divergence traces plus the accumulated
    time integral of the first-order remainder (shape (2, grid)).
    Returns (d3u, (r1, r2)) where r1, r2 are the sup-norms of the two
    structurally-zero rows; InconsistentSystem is raised when they
    exceed tol * scale (tol=None disables the guard).
    """
    grid = coeffs.grid
    a0 = coeffs.a0_at(t)
    ops = RecoveryOperators(a0, mu)

    F = np.empty((8,) + grid.shape)
    rhs = np.asarray(f_val, dtype=float) - matvec(a0, u_t) \
        - matvec(coeffs.spatial_at(0), du1) - matvec(coeffs.spatial_at(1), du2)
    if not coeffs.d_is_zero():
        rhs = rhs - matvec(coeffs.d_at(t), u)
    F[:6] = rhs
    mt_a0 = ops.mt_a0
    F[6] = history[0] - np.einsum("l...,l...->...", mt_a0[0], du1) \
        - np.einsum("l...,l...->...", mt_a0[1], du2)
    F[7] = history[1] - np.einsum("l...,l...->...", mt_a0[3], du1) \
        - np.einsum("l...,l...->...", mt_a0[4], du2)

    Fh = ops.apply_elimination(F)
    d3u = np.empty((6,) + grid.shape)
    d3u[4] = Fh[0]
    d3u[3] = Fh[1]
    d3u[1] = Fh[3]
    d3u[0] = Fh[4]
    d3u[2] = Fh[6]
    d3u[5] = Fh[7]
    r1 = float(np.abs(Fh[2]).max())
    r2 = float(np.abs(Fh[5]).max())
    if tol is not None:
        scale = max(1.0, float(np.abs(F).max()))
        if max(r1, r2) > tol * scale:
            raise InconsistentSystem(
                f"zero-row residuals ({r1:.3e}, {r2:.3e}) exceed "
                f"{tol:.1e} * {scale:.3e}")
    return d3u, (r1, r2)
