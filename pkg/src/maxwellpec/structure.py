"""Constant structure matrices of the Maxwell system in first-order form.

The evolutionary Maxwell equations are written as

    A0 du/dt + sum_j A_j^co d_j u + D u = f,      u = (E, H),

where the spatial coefficient matrices encode the curl:

    A_j^co = [[0, -J_j], [J_j, 0]],   J_{l;mn} = -eps_{lmn},
    sum_j J_j d_j = curl.

The wall x3 = 0 carries the perfectly-conducting condition, expressed
through a rank-2 boundary matrix B.  Everything here is exact integer
arithmetic; the few matrices that are only determined up to a choice
(the boundary factorizations C, M and the kernel-cycling matrix Q) are
obtained by solving small linear systems and asserted to machine
precision.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "levi_civita",
    "StructureMatrixSet",
    "build_structure_matrices",
    "apply_curl_operator",
    "FactorizationError",
]


class FactorizationError(RuntimeError):
    """A defining linear identity failed to hold; indicates a code bug."""


def levi_civita(i: int, j: int, k: int) -> int:
    """Levi-Civita symbol for 0-based indices in {0, 1, 2}."""
    return (i - j) * (j - k) * (k - i) // 2


def _curl_generators() -> np.ndarray:
    """The three 3x3 generators J_l with J_{l;mn} = -eps_{lmn}."""
    J = np.zeros((3, 3, 3))
    for l in range(3):
        for m in range(3):
            for n in range(3):
                J[l, m, n] = -levi_civita(l, m, n)
    return J


@dataclass(frozen=True)
class StructureMatrixSet:
    """Immutable bundle of the constant matrices of the half-space model.

    j1..j3   : 3x3 curl generators
    a1..a3   : symmetric 6x6 spatial coefficients [[0,-J],[J,0]]
    b        : 2x6 rank-2 boundary matrix (e2, -e1)^T
    c        : 2x6 matrix with a3 = (c^T b + b^T c)/2
    m        : 2x6 matrix with b = m a3
    q        : invertible 6x6 matrix cycling the range of a3 back onto
               the complement of its kernel (a3 q is a 0/1 selector)
    """

    j1: np.ndarray
    j2: np.ndarray
    j3: np.ndarray
    a1: np.ndarray
    a2: np.ndarray
    a3: np.ndarray
    b: np.ndarray
    c: np.ndarray
    m: np.ndarray
    q: np.ndarray

    @property
    def a(self) -> np.ndarray:
        """Stacked (3,6,6) view of a1, a2, a3."""
        return np.stack([self.a1, self.a2, self.a3])


def _solve_boundary_factorizations(a3: np.ndarray, b: np.ndarray):
    """Least-squares solves for m (b = m a3) and c (a3 = sym(c^T b))."""
    # b = m a3  <=>  a3 m^T = b^T (a3 symmetric); min-norm solution.
    m = np.linalg.lstsq(a3, b.T, rcond=None)[0].T
    if np.abs(b - m @ a3).max() != 0.0:
        raise FactorizationError("b = m a3 is not exact")

    # a3 = (c^T b + b^T c)/2 is linear in the 12 entries of c.
    design = np.zeros((36, 12))
    for idx in range(12):
        cc = np.zeros(12)
        cc[idx] = 1.0
        cmat = cc.reshape(2, 6)
        design[:, idx] = (0.5 * (cmat.T @ b + b.T @ cmat)).ravel()
    cvec, *_ = np.linalg.lstsq(design, a3.ravel(), rcond=None)
    c = cvec.reshape(2, 6)
    if np.abs(a3 - 0.5 * (c.T @ b + b.T @ c)).max() > 1e-14:
        raise FactorizationError("a3 = sym(c^T b) residual above 1e-14")
    return m, c


def build_structure_matrices() -> StructureMatrixSet:
    """Assemble the constant matrices and verify their algebraic identities."""
    J = _curl_generators()
    a = np.zeros((3, 6, 6))
    for l in range(3):
        a[l, :3, 3:] = -J[l]
        a[l, 3:, :3] = J[l]

    b = np.zeros((2, 6))
    b[0, 1] = 1.0   # e2^T
    b[1, 0] = -1.0  # -e1^T

    m, c = _solve_boundary_factorizations(a[2], b)

    # q maps so that a3 q selects the four non-kernel components.
    q = np.array(
        [
            [0, 0, 0, 0, 1, 0],
            [0, 0, 0, -1, 0, 0],
            [0, 0, 1, 0, 0, 0],
            [0, -1, 0, 0, 0, 0],
            [1, 0, 0, 0, 0, 0],
            [0, 0, 0, 0, 0, 1],
        ],
        dtype=float,
    )
    a3q_expected = np.diag([1.0, 1, 0, 1, 1, 0])
    if not np.array_equal(a[2] @ q, a3q_expected):
        raise FactorizationError("a3 q does not equal the 0/1 selector")

    for l in range(3):
        if not np.array_equal(a[l], a[l].T):
            raise FactorizationError("a%d is not symmetric" % (l + 1))

    return StructureMatrixSet(
        j1=J[0], j2=J[1], j3=J[2],
        a1=a[0], a2=a[1], a3=a[2],
        b=b, c=c, m=m, q=q,
    )


def apply_curl_operator(partials: np.ndarray) -> np.ndarray:
    """Evaluate sum_j J_j d_j u from the partials of a 3-vector field.

    partials[l, j, ...] holds d_j u_l (exact or discrete).  Returns the
    3-component field sum_j J_j (d_j u); componentwise this is curl u.
    """
    partials = np.asarray(partials)
    if partials.shape[:2] != (3, 3):
        raise ValueError("expected partials of shape (3, 3, ...)")
    J = _curl_generators()
    # out_m = sum_{j,n} J_{j;mn} d_j u_n
    return np.einsum("jmn,njx->mx", J, partials.reshape(3, 3, -1)).reshape(
        partials.shape[:1] + partials.shape[2:]
    )
