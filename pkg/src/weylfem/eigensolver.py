"""Smallest eigenpairs of the sparse pencil ``(A, M)`` by LOBPCG."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .errors import FactorizationError, InvalidArgumentError, IterationLimitError
from .linalg import DENSE_CAP, EigenResult, SolverKind, dense_generalized_eig

__all__ = [
    "EigenResult",
    "SolverKind",
    "lobpcg_smallest",
    "smallest_eigenpairs",
    "rayleigh_quotient",
    "residual_check",
    "relative_residuals",
    "norm_estimate",
]

log = logging.getLogger(__name__)


class _Breakdown(ArithmeticError):
    pass


def norm_estimate(A) -> float:
    """Max absolute row sum, an upper bound for the 2-norm of a symmetric matrix."""
    if sp.issparse(A):
        return float(abs(A).sum(axis=1).max())
    return float(np.abs(np.asarray(A)).sum(axis=1).max())


def relative_residuals(A, M, values, vectors, norm_a=None, norm_m=None):
    """``||A x - lam M x|| / ((||A|| + |lam| ||M||) ||x||)`` for each pair."""
    norm_a = norm_estimate(A) if norm_a is None else norm_a
    norm_m = norm_estimate(M) if norm_m is None else norm_m
    R = A @ vectors - (M @ vectors) * values
    denom = (norm_a + np.abs(values) * norm_m) * np.linalg.norm(vectors, axis=0)
    return np.linalg.norm(R, axis=0) / denom, np.linalg.norm(R, axis=0)


def _m_orthonormalize(S, M, MS=None):
    """Cholesky-QR in the M inner product, with one re-orthogonalization pass."""
    for _ in range(2):
        MS = M @ S
        G = S.T @ MS
        G = 0.5 * (G + G.T)
        scale = np.sqrt(np.diag(G))
        if not np.all(scale > 0):
            raise _Breakdown("zero column in block")
        S = S / scale
        G = G / np.outer(scale, scale)
        try:
            L = sla.cholesky(G, lower=True)
        except sla.LinAlgError as exc:
            raise _Breakdown(str(exc)) from None
        diag = np.abs(np.diag(L))
        if diag.min() <= 1e-10 * diag.max():
            raise _Breakdown("ill-conditioned Gram matrix")
        S = sla.solve_triangular(L, S.T, lower=True).T
    return S


def lobpcg_smallest(A, M, k, tol=1e-10, maxiter=5000, seed=0) -> EigenResult:
    """k smallest eigenpairs of ``A x = lambda M x``.

    Parameters
    ----------
    A : sparse symmetric positive semi-definite matrix
    M : sparse symmetric positive definite matrix
    k : int
        Number of wanted eigenpairs.
    tol : float
        Relative residual target, see :func:`relative_residuals`.
    maxiter : int
    seed : int
        Seed of the random initial block.

    Notes
    -----
    The block carries ``max(5, ceil(k / 5))`` extra columns, uses the
    diagonal of ``A`` as preconditioner and soft-locks converged columns
    (they stay in the Rayleigh-Ritz basis but get no new directions).  If
    the block is not small compared to the order the pencil is solved
    densely instead.
    """
    n = A.shape[0]
    if not 1 <= k <= n:
        raise InvalidArgumentError(f"k must be in [1, {n}], got {k}")
    m = min(k + max(5, math.ceil(k / 5)), n)
    if 3 * m >= n:
        if n > DENSE_CAP:
            raise InvalidArgumentError(f"block of {m} too large for order {n}")
        full = dense_generalized_eig(A, M)
        return EigenResult(
            values=full.values[:k],
            vectors=full.vectors[:, :k],
            residuals=full.residuals[:k],
            iterations=0,
            solver=SolverKind.DENSE,
        )

    A = sp.csr_matrix(A)
    M = sp.csr_matrix(M)
    norm_a = norm_estimate(A)
    norm_m = norm_estimate(M)
    diag = A.diagonal().copy()
    diag[diag <= 0] = 1.0
    rng = np.random.default_rng(seed)

    X = _m_orthonormalize(rng.standard_normal((n, m)), M)
    AX = A @ X
    theta, C = sla.eigh(0.5 * (X.T @ AX + AX.T @ X))
    X, AX = X @ C, AX @ C
    MX = M @ X
    P = None
    restarted = False

    for it in range(1, maxiter + 1):
        R = AX - MX * theta
        rel = np.linalg.norm(R, axis=0) / (
            (norm_a + np.abs(theta) * norm_m) * np.linalg.norm(X, axis=0)
        )
        if np.all(rel[:k] <= tol):
            log.debug("lobpcg converged in %d iterations", it - 1)
            return EigenResult(
                values=theta[:k].copy(),
                vectors=X[:, :k].copy(),
                residuals=np.linalg.norm(R[:, :k], axis=0),
                iterations=it - 1,
                solver=SolverKind.LOBPCG,
            )
        active = rel > tol
        W = R[:, active] / diag[:, None]
        W -= X @ (MX.T @ W)

        blocks = [X, W] if P is None else [X, W, P]
        while True:
            try:
                S = _m_orthonormalize(np.hstack(blocks), M)
                break
            except _Breakdown:
                if len(blocks) == 3:
                    blocks = blocks[:2]
                    continue
                if restarted:
                    raise FactorizationError(
                        f"LOBPCG Gram matrix broke down twice (iteration {it})"
                    ) from None
                restarted = True
                log.warning("LOBPCG Gram breakdown at iteration %d, restarting directions", it)
                W = rng.standard_normal(W.shape)
                W -= X @ (MX.T @ W)
                blocks = [X, W]

        AS = A @ S
        H = S.T @ AS
        vals, C = sla.eigh(0.5 * (H + H.T))
        C = C[:, :m]
        theta = vals[:m]
        X = S @ C
        AX = AS @ C
        MX = M @ X
        P = S[:, m:] @ C[m:, :]
        P = P[:, active] if np.any(active) else None

    rel_max = float(np.max(rel[:k]))
    raise IterationLimitError(
        f"LOBPCG did not converge in {maxiter} iterations (max relative residual {rel_max:.3e})",
        iterations=maxiter,
        residual=rel_max,
    )


def smallest_eigenpairs(A, M, k, solver="dense", tol=1e-10, maxiter=5000, seed=0) -> EigenResult:
    """Dispatch to the dense oracle or LOBPCG and keep the first ``k`` pairs."""
    solver = SolverKind(solver)
    if solver is SolverKind.DENSE:
        full = dense_generalized_eig(A, M)
        return EigenResult(
            values=full.values[:k],
            vectors=full.vectors[:, :k],
            residuals=full.residuals[:k],
            iterations=0,
            solver=SolverKind.DENSE,
        )
    return lobpcg_smallest(A, M, k, tol=tol, maxiter=maxiter, seed=seed)


def rayleigh_quotient(A, M, x) -> float:
    x = np.asarray(x, dtype=float)
    if not np.any(x):
        raise InvalidArgumentError("Rayleigh quotient of the zero vector")
    return float(x @ (A @ x)) / float(x @ (M @ x))


@dataclass
class ResidualReport:
    passed: bool
    tol: float
    relative: np.ndarray
    absolute: np.ndarray
    failed: list[int]


def residual_check(A, M, result: EigenResult, tol: float) -> ResidualReport:
    """Recompute every residual from scratch and compare with ``tol``."""
    rel, absolute = relative_residuals(A, M, np.asarray(result.values), np.asarray(result.vectors))
    failed = [int(i) for i in np.flatnonzero(~(rel <= tol))]
    return ResidualReport(passed=not failed, tol=tol, relative=rel, absolute=absolute, failed=failed)
