"""P1 stiffness, mass and load assembly on structured simplicial meshes."""

from __future__ import annotations

import math
from functools import lru_cache
from dataclasses import dataclass
from typing import Callable, TextIO

import numpy as np
import scipy.sparse as sp

from .errors import CoefficientError, ConsistencyError, InvalidMeshError
from .linalg import cg_solve
from .mesh import BoundaryCondition, Mesh
from .quadrature import QuadratureSpec, cell_quadrature


@dataclass(frozen=True)
class CoefficientField:
    """Matrix-valued diffusion coefficient with declared spectral bounds.

    ``evaluate`` maps points of shape ``(P, d)`` to matrices ``(P, d, d)``.
    """

    evaluate: Callable[[np.ndarray], np.ndarray]
    bounds: tuple[float, float]

    @classmethod
    def scalar(cls, c: float, dim: int) -> "CoefficientField":
        c = float(c)
        eye = np.eye(dim)

        def evaluate(points):
            return np.broadcast_to(c * eye, (np.shape(points)[0], dim, dim))

        return cls(evaluate, (c, c))

    @classmethod
    def constant(cls, matrix) -> "CoefficientField":
        matrix = np.asarray(matrix, dtype=float)
        eig = np.linalg.eigvalsh(0.5 * (matrix + matrix.T))

        def evaluate(points):
            return np.broadcast_to(matrix, (np.shape(points)[0],) + matrix.shape)

        return cls(evaluate, (float(eig[0]), float(eig[-1])))

    def sample(self, points: np.ndarray) -> np.ndarray:
        """Evaluate and spot-check symmetry, definiteness and the bounds."""
        values = np.asarray(self.evaluate(points), dtype=float)
        d = points.shape[1]
        if values.shape != (points.shape[0], d, d):
            raise CoefficientError(f"coefficient returned shape {values.shape}")
        if not np.allclose(values, np.swapaxes(values, 1, 2), rtol=0, atol=1e-14 * np.abs(values).max()):
            raise CoefficientError("coefficient is not symmetric")
        eig = np.linalg.eigvalsh(values)
        if eig.min() <= 0:
            raise CoefficientError(f"coefficient is not positive definite (eigenvalue {eig.min():g})")
        lo, hi = self.bounds
        slack = 1e-12 * max(abs(hi), 1.0)
        if eig.min() < lo - slack or eig.max() > hi + slack:
            raise CoefficientError(
                f"coefficient eigenvalues [{eig.min():g}, {eig.max():g}] leave declared bounds "
                f"[{lo:g}, {hi:g}]"
            )
        return values


@lru_cache(maxsize=16)
def p1_geometry(mesh: Mesh) -> tuple[np.ndarray, np.ndarray]:
    """Cell volumes and barycentric gradients, shape ``(n_cells, d + 1, d)``."""
    x = mesh.vertices[mesh.cells]
    jac = x[:, 1:, :] - x[:, :1, :]  # rows are edge vectors
    det = np.linalg.det(jac)
    d = mesh.dim
    vol = det / math.factorial(d)
    diam = np.abs(jac).max(axis=(1, 2))
    if np.any(vol <= 1e-14 * diam**d):
        bad = int(np.flatnonzero(vol <= 1e-14 * diam**d)[0])
        raise InvalidMeshError(f"cell {bad} is degenerate or inverted")
    # grad(lambda_j), j >= 1, are the columns of jac^-1
    inv = np.linalg.inv(jac)
    grads = np.empty((mesh.n_cells, d + 1, d))
    grads[:, 1:, :] = np.swapaxes(inv, 1, 2)
    grads[:, 0, :] = -grads[:, 1:, :].sum(axis=1)
    vol.setflags(write=False)
    grads.setflags(write=False)
    return vol, grads


def _assemble(mesh: Mesh, local: np.ndarray) -> sp.csr_matrix:
    """Sum symmetric element matrices into the free-DOF CSR matrix.

    Duplicates are reduced in ascending cell order and entries ``(i, j)``
    and ``(j, i)`` receive the same sequence of values, so the result is
    exactly symmetric and bit-reproducible.
    """
    local = 0.5 * (local + np.swapaxes(local, 1, 2))
    nloc = local.shape[1]
    dofs = mesh.dof_map[mesh.cells]  # (nc, nloc)
    rows = np.repeat(dofs, nloc, axis=1).ravel()
    cols = np.tile(dofs, (1, nloc)).ravel()
    vals = local.reshape(-1)
    keep = (rows >= 0) & (cols >= 0)
    rows, cols, vals = rows[keep], cols[keep], vals[keep]
    n = mesh.n_dofs
    keys = rows * n + cols
    order = np.argsort(keys, kind="stable")
    keys, vals = keys[order], vals[order]
    if keys.size == 0:
        return sp.csr_matrix((n, n))
    starts = np.flatnonzero(np.r_[True, keys[1:] != keys[:-1]])
    data = np.add.reduceat(vals, starts)
    ukeys = keys[starts]
    r, c = np.divmod(ukeys, n)
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.add.at(indptr, r + 1, 1)
    indptr = np.cumsum(indptr)
    out = sp.csr_matrix((data, c, indptr), shape=(n, n))
    out.has_sorted_indices = True
    return out


def assemble_stiffness(mesh: Mesh, alpha: CoefficientField | None = None) -> sp.csr_matrix:
    """Stiffness matrix ``A_ij = a(phi_j, phi_i)`` on the free DOFs.

    The coefficient is sampled once per cell at the barycenter, which is
    exact for constant coefficients.
    """
    vol, grads = p1_geometry(mesh)
    if alpha is None:
        local = vol[:, None, None] * (grads @ np.swapaxes(grads, 1, 2))
    else:
        centers = mesh.vertices[mesh.cells].mean(axis=1)
        coef = alpha.sample(centers)
        local = vol[:, None, None] * (grads @ coef @ np.swapaxes(grads, 1, 2))
    return _assemble(mesh, local)


def assemble_mass(mesh: Mesh) -> sp.csr_matrix:
    """Consistent P1 mass matrix ``|T| (1 + delta_ij) / ((d + 1)(d + 2))``."""
    vol, _ = p1_geometry(mesh)
    d = mesh.dim
    ref = (np.ones((d + 1, d + 1)) + np.eye(d + 1)) / ((d + 1) * (d + 2))
    return _assemble(mesh, vol[:, None, None] * ref[None, :, :])


def _scatter(mesh: Mesh, local: np.ndarray) -> np.ndarray:
    """Sum per-cell local vectors ``(n_cells, d + 1)`` into free DOFs in cell order."""
    dofs = mesh.dof_map[mesh.cells].ravel()
    vals = local.ravel()
    keep = dofs >= 0
    return np.bincount(dofs[keep], weights=vals[keep], minlength=mesh.n_dofs)


def assemble_load(mesh: Mesh, w, quad: QuadratureSpec = QuadratureSpec()) -> np.ndarray:
    """Vector of inner products ``b_i = (w, phi_i)`` by composite quadrature.

    ``w`` is any callable mapping points ``(P, d)`` to values ``(P,)``.
    """
    cq = cell_quadrature(mesh, quad)
    nc, nq, d = cq.points.shape
    values = np.asarray(w(cq.points.reshape(-1, d)), dtype=float).reshape(nc, nq)
    local = (values * cq.weights) @ cq.bary
    return _scatter(mesh, local)


def assemble_energy_load(mesh: Mesh, grad_w, quad: QuadratureSpec = QuadratureSpec(),
                         alpha: CoefficientField | None = None) -> np.ndarray:
    """Vector ``g_i = a(w, phi_i)`` given the gradient of ``w``.

    The coefficient is taken at the cell barycenter, as in the stiffness
    matrix, so that ``g = A c`` whenever ``w`` lies in the FE space.
    """
    vol, grads = p1_geometry(mesh)
    cq = cell_quadrature(mesh, quad)
    nc, nq, d = cq.points.shape
    gw = np.asarray(grad_w(cq.points.reshape(-1, d)), dtype=float).reshape(nc, nq, d)
    mean_grad = np.einsum("cq,cqk->ck", cq.weights, gw)  # integral over each cell
    if alpha is not None:
        centers = mesh.vertices[mesh.cells].mean(axis=1)
        mean_grad = np.einsum("ckl,cl->ck", alpha.sample(centers), mean_grad)
    local = np.einsum("cjk,ck->cj", grads, mean_grad)
    return _scatter(mesh, local)


def solve_source(A, b, *, bc=BoundaryCondition.DIRICHLET, M=None, tol=1e-10, maxiter=None):
    """Solve the FE system ``A mu = b``.

    For the Neumann problem ``b`` must be orthogonal to constants; the
    returned solution has zero mean in the ``M`` inner product (Euclidean
    if ``M`` is not given).
    """
    b = np.asarray(b, dtype=float)
    if BoundaryCondition(bc) is BoundaryCondition.NEUMANN:
        scale = np.abs(b).sum()
        if abs(b.sum()) > 1e-10 * max(scale, np.finfo(float).tiny):
            raise ConsistencyError(
                f"Neumann load is not orthogonal to constants (sum {b.sum():.3e})"
            )
        mu, _ = cg_solve(A, b, tol=tol, maxiter=maxiter, deflate_constants=True)
        if M is not None:
            ones = np.ones_like(mu)
            m1 = M @ ones
            mu = mu - (m1 @ mu) / (m1 @ ones)
        return mu
    mu, _ = cg_solve(A, b, tol=tol, maxiter=maxiter)
    return mu


def write_coo(matrix, fh: TextIO) -> None:
    """Dump ``row col value`` lines (0-based, row-major order)."""
    coo = sp.csr_matrix(matrix).tocoo()
    for r, c, v in zip(coo.row, coo.col, coo.data):
        fh.write(f"{int(r)} {int(c)} {float(v)!r}\n")
