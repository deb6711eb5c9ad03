"""Sparse kernels and dense reference solvers.

The dense path (Cholesky, cyclic Jacobi, Householder tridiagonalization with
implicit QL) is self-contained so that it can serve as an oracle for the
sparse eigensolver.  The inner loops are compiled with numba.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass

import numba
import numpy as np
import scipy.sparse as sp

from .errors import DimensionError, FactorizationError, InvalidArgumentError, IterationLimitError

log = logging.getLogger(__name__)

DENSE_CAP = 2000
JACOBI_MAX_ORDER = 512


class SolverKind(str, enum.Enum):
    DENSE = "dense"
    LOBPCG = "lobpcg"


@dataclass
class EigenResult:
    """Ascending eigenpairs of ``A x = lambda M x``.

    ``vectors`` holds M-orthonormal eigenvectors as columns and
    ``residuals`` the 2-norms ``||A x - lambda M x||``.
    """

    values: np.ndarray
    vectors: np.ndarray
    residuals: np.ndarray
    iterations: int
    solver: SolverKind

    def __len__(self):
        return self.values.shape[0]


def spmv(A, x: np.ndarray) -> np.ndarray:
    """CSR matrix-vector product, rows summed in ascending column order."""
    x = np.asarray(x, dtype=float)
    if A.shape[1] != x.shape[0]:
        raise DimensionError(f"matrix has {A.shape[1]} columns, vector has {x.shape[0]} entries")
    if sp.issparse(A):
        A = A.tocsr()
        if not A.has_sorted_indices:
            A = A.sorted_indices()
    return A @ x


def cg_solve(A, b, tol=1e-10, maxiter=None, deflate_constants=False, x0=None):
    """Diagonally preconditioned conjugate gradients.

    Parameters
    ----------
    A : sparse or dense SPD matrix
        SPSD is allowed with ``deflate_constants``; the constant vector
        must span the null space.
    b : ndarray
    tol : float
        Target relative residual ``||b - A x|| / ||b||``.
    maxiter : int, optional
        Defaults to ``10 * n``.
    deflate_constants : bool
        Work in the complement of the constant vector.  ``b`` must be
        (numerically) orthogonal to constants; the result has zero mean.

    Returns
    -------
    x : ndarray
    iterations : int
    """
    b = np.asarray(b, dtype=float)
    n = b.shape[0]
    if A.shape != (n, n):
        raise DimensionError(f"matrix shape {A.shape} does not match rhs of length {n}")
    maxiter = 10 * n if maxiter is None else maxiter
    diag = A.diagonal() if hasattr(A, "diagonal") else np.ones(n)
    diag = np.where(diag > 0, diag, 1.0)

    def project(v):
        return v - v.mean() if deflate_constants else v

    b = project(b)
    bnorm = np.linalg.norm(b)
    x = np.zeros(n) if x0 is None else project(np.asarray(x0, dtype=float).copy())
    if bnorm == 0.0:
        return np.zeros(n), 0
    r = b - A @ x
    r = project(r)
    if np.linalg.norm(r) <= tol * bnorm:
        return x, 0
    z = project(r / diag)
    p = z.copy()
    rz = r @ z
    for it in range(1, maxiter + 1):
        Ap = project(A @ p)
        pAp = p @ Ap
        if pAp <= 0:
            raise FactorizationError("conjugate gradients met a non-positive curvature direction")
        step = rz / pAp
        x += step * p
        r -= step * Ap
        rnorm = np.linalg.norm(r)
        if rnorm <= tol * bnorm:
            # confirm against the true residual before declaring convergence
            true_r = project(b - A @ x)
            if np.linalg.norm(true_r) <= tol * bnorm:
                return project(x), it
            r = true_r
        z = project(r / diag)
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    res = np.linalg.norm(project(b - A @ x)) / bnorm
    raise IterationLimitError(
        f"conjugate gradients did not reach {tol:g} in {maxiter} iterations (residual {res:.3e})",
        iterations=maxiter,
        residual=res,
    )


# ---------------------------------------------------------------- dense kernels


@numba.njit(cache=True)
def _cholesky_kernel(a):
    n = a.shape[0]
    L = np.zeros((n, n))
    dmax = 0.0
    for i in range(n):
        dmax = max(dmax, abs(a[i, i]))
    for j in range(n):
        s = a[j, j]
        for k in range(j):
            s -= L[j, k] * L[j, k]
        if not s > 1e-14 * dmax:
            return L, j
        ljj = math.sqrt(s)
        L[j, j] = ljj
        for i in range(j + 1, n):
            t = a[i, j]
            for k in range(j):
                t -= L[i, k] * L[j, k]
            L[i, j] = t / ljj
    return L, -1


def cholesky(a: np.ndarray) -> np.ndarray:
    """Lower Cholesky factor; every pivot must exceed ``1e-14 * max|diag|``."""
    a = np.ascontiguousarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {a.shape}")
    L, bad = _cholesky_kernel(a)
    if bad >= 0:
        raise FactorizationError(f"matrix is not positive definite (pivot {bad})")
    return L


@numba.njit(cache=True)
def _forward_solve(L, B):
    n, m = B.shape
    X = B.copy()
    for i in range(n):
        for k in range(i):
            lik = L[i, k]
            if lik != 0.0:
                for j in range(m):
                    X[i, j] -= lik * X[k, j]
        inv = 1.0 / L[i, i]
        for j in range(m):
            X[i, j] *= inv
    return X


@numba.njit(cache=True)
def _backward_solve_transpose(L, B):
    # solves L^T X = B
    n, m = B.shape
    X = B.copy()
    for i in range(n - 1, -1, -1):
        for k in range(i + 1, n):
            lki = L[k, i]
            if lki != 0.0:
                for j in range(m):
                    X[i, j] -= lki * X[k, j]
        inv = 1.0 / L[i, i]
        for j in range(m):
            X[i, j] *= inv
    return X


@numba.njit(cache=True)
def _jacobi_kernel(a, tol, max_sweeps):
    # Cyclic-by-row Jacobi.  Only rows p, q are read (contiguous); columns
    # are mirrored by writes.  vt holds the eigenvectors as rows.
    n = a.shape[0]
    vt = np.eye(n)
    rowp = np.empty(n)
    rowq = np.empty(n)
    fro = 0.0
    for i in range(n):
        for j in range(n):
            fro += a[i, j] * a[i, j]
    fro = math.sqrt(fro)
    # One sweep past the threshold: convergence is quadratic by then, so
    # the extra sweep drives the off-diagonal part to rounding level.
    polish = False
    for sweep in range(max_sweeps):
        off = 0.0
        for i in range(n):
            for j in range(i + 1, n):
                off += 2.0 * a[i, j] * a[i, j]
        if polish or math.sqrt(off) == 0.0:
            return vt, sweep
        if math.sqrt(off) <= tol * fro:
            polish = True
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = 1.0 / (abs(theta) + math.sqrt(theta * theta + 1.0))
                if theta < 0.0:
                    t = -t
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                tau = s / (1.0 + c)
                app = a[p, p]
                aqq = a[q, q]
                for r in range(n):
                    arp = a[p, r]
                    arq = a[q, r]
                    rowp[r] = arp - s * (arq + tau * arp)
                    rowq[r] = arq + s * (arp - tau * arq)
                rowp[p] = app - t * apq
                rowq[q] = aqq + t * apq
                rowp[q] = 0.0
                rowq[p] = 0.0
                for r in range(n):
                    a[p, r] = rowp[r]
                    a[q, r] = rowq[r]
                for r in range(n):
                    a[r, p] = rowp[r]
                    a[r, q] = rowq[r]
                for r in range(n):
                    vrp = vt[p, r]
                    vrq = vt[q, r]
                    vt[p, r] = vrp - s * (vrq + tau * vrp)
                    vt[q, r] = vrq + s * (vrp - tau * vrq)
    return vt, -1


@numba.njit(cache=True)
def _tred2(V):
    # Householder reduction to tridiagonal form (EISPACK tred2 ordering).
    n = V.shape[0]
    d = np.empty(n)
    e = np.zeros(n)
    for j in range(n):
        d[j] = V[n - 1, j]
    for i in range(n - 1, 0, -1):
        scale = 0.0
        h = 0.0
        for k in range(i):
            scale += abs(d[k])
        if scale == 0.0:
            e[i] = d[i - 1]
            for j in range(i):
                d[j] = V[i - 1, j]
                V[i, j] = 0.0
                V[j, i] = 0.0
        else:
            for k in range(i):
                d[k] /= scale
                h += d[k] * d[k]
            f = d[i - 1]
            g = math.sqrt(h)
            if f > 0:
                g = -g
            e[i] = scale * g
            h = h - f * g
            d[i - 1] = f - g
            for j in range(i):
                e[j] = 0.0
            for j in range(i):
                f = d[j]
                V[j, i] = f
                g = e[j] + V[j, j] * f
                for k in range(j + 1, i):
                    g += V[k, j] * d[k]
                    e[k] += V[k, j] * f
                e[j] = g
            f = 0.0
            for j in range(i):
                e[j] /= h
                f += e[j] * d[j]
            hh = f / (h + h)
            for j in range(i):
                e[j] -= hh * d[j]
            for j in range(i):
                f = d[j]
                g = e[j]
                for k in range(j, i):
                    V[k, j] -= f * e[k] + g * d[k]
                d[j] = V[i - 1, j]
                V[i, j] = 0.0
        d[i] = h
    for i in range(n - 1):
        V[n - 1, i] = V[i, i]
        V[i, i] = 1.0
        h = d[i + 1]
        if h != 0.0:
            for k in range(i + 1):
                d[k] = V[k, i + 1] / h
            for j in range(i + 1):
                g = 0.0
                for k in range(i + 1):
                    g += V[k, i + 1] * V[k, j]
                for k in range(i + 1):
                    V[k, j] -= g * d[k]
        for k in range(i + 1):
            V[k, i + 1] = 0.0
    for j in range(n):
        d[j] = V[n - 1, j]
        V[n - 1, j] = 0.0
    V[n - 1, n - 1] = 1.0
    e[0] = 0.0
    return d, e


@numba.njit(cache=True)
def _tql2(d, e, Z, max_iter):
    # Implicit QL on the tridiagonal (d, e).  Z holds eigenvectors as rows so
    # each Givens rotation touches two contiguous rows.
    n = d.shape[0]
    for i in range(1, n):
        e[i - 1] = e[i]
    e[n - 1] = 0.0
    f = 0.0
    tst1 = 0.0
    eps = 2.220446049250313e-16
    for l in range(n):
        tst1 = max(tst1, abs(d[l]) + abs(e[l]))
        m = l
        while m < n:
            if abs(e[m]) <= eps * tst1:
                break
            m += 1
        if m > l:
            it = 0
            while True:
                it += 1
                if it > max_iter:
                    return False
                g = d[l]
                p = (d[l + 1] - g) / (2.0 * e[l])
                r = math.hypot(p, 1.0)
                if p < 0:
                    r = -r
                d[l] = e[l] / (p + r)
                d[l + 1] = e[l] * (p + r)
                dl1 = d[l + 1]
                h = g - d[l]
                for i in range(l + 2, n):
                    d[i] -= h
                f += h
                p = d[m]
                c = 1.0
                c2 = c
                c3 = c
                el1 = e[l + 1]
                s = 0.0
                s2 = 0.0
                for i in range(m - 1, l - 1, -1):
                    c3 = c2
                    c2 = c
                    s2 = s
                    g = c * e[i]
                    h = c * p
                    r = math.hypot(p, e[i])
                    e[i + 1] = s * r
                    s = e[i] / r
                    c = p / r
                    p = c * d[i] - s * g
                    d[i + 1] = h + s * (c * g + s * d[i])
                    for k in range(n):
                        zi1 = Z[i + 1, k]
                        zi = Z[i, k]
                        Z[i + 1, k] = s * zi + c * zi1
                        Z[i, k] = c * zi - s * zi1
                p = -s * s2 * c3 * el1 * e[l] / dl1
                e[l] = s * p
                d[l] = c * p
                if not abs(e[l]) > eps * tst1:
                    break
        d[l] = d[l] + f
        e[l] = 0.0
    return True


def _check_square(a):
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {a.shape}")
    return a


def as_dense_sym(a) -> np.ndarray:
    """Dense copy of ``a`` with exact symmetry enforced."""
    if sp.issparse(a):
        a = a.toarray()
    a = _check_square(a)
    return np.ascontiguousarray(0.5 * (a + a.T))


def symmetric_eig(a, method: str = "auto", tol: float = 1e-12) -> tuple[np.ndarray, np.ndarray]:
    """All eigenpairs of a symmetric matrix, ascending.

    ``method`` is ``"jacobi"``, ``"ql"`` (Householder + implicit QL) or
    ``"auto"``, which picks Jacobi up to order 512.
    """
    a = as_dense_sym(a)
    n = a.shape[0]
    if n == 0:
        return np.empty(0), np.empty((0, 0))
    if method == "auto":
        method = "jacobi" if n <= JACOBI_MAX_ORDER else "ql"
    if method == "jacobi":
        work = a.copy()
        vt, sweeps = _jacobi_kernel(work, tol, 100)
        if sweeps < 0:
            raise IterationLimitError("Jacobi iteration did not converge in 100 sweeps")
        vals = np.diag(work).copy()
        vecs = vt.T
    elif method == "ql":
        V = a.copy()
        d, e = _tred2(V)
        Z = np.ascontiguousarray(V.T)
        if not _tql2(d, e, Z, 60):
            raise IterationLimitError("implicit QL did not converge")
        vals, vecs = d, Z.T
    else:
        raise InvalidArgumentError(f"unknown method {method!r}")
    order = np.argsort(vals, kind="stable")
    return vals[order], np.ascontiguousarray(vecs[:, order])


def dense_generalized_eig(A, M, cap: int = DENSE_CAP, method: str = "auto") -> EigenResult:
    """All eigenpairs of ``A x = lambda M x`` through Cholesky reduction.

    ``M = L L^T`` turns the pencil into the standard problem for
    ``L^-1 A L^-T``; eigenvectors are mapped back with ``L^-T`` and come
    out M-orthonormal.
    """
    Ad = as_dense_sym(A)
    Md = as_dense_sym(M)
    n = Ad.shape[0]
    if Md.shape != Ad.shape:
        raise DimensionError(f"pencil shapes differ: {Ad.shape} vs {Md.shape}")
    if n > cap:
        raise InvalidArgumentError(f"order {n} exceeds the dense cap {cap}")
    L = cholesky(Md)
    Y = _forward_solve(L, Ad)  # L^-1 A
    C = _forward_solve(L, np.ascontiguousarray(Y.T))  # L^-1 A L^-T
    vals, V = symmetric_eig(C, method=method)
    X = _backward_solve_transpose(L, V)
    R = Ad @ X - (Md @ X) * vals
    return EigenResult(
        values=vals,
        vectors=X,
        residuals=np.linalg.norm(R, axis=0),
        iterations=0,
        solver=SolverKind.DENSE,
    )


def reduced_matrix(A, M) -> np.ndarray:
    """``L^-1 A L^-T`` for ``M = L L^T``."""
    L = cholesky(as_dense_sym(M))
    Y = _forward_solve(L, as_dense_sym(A))
    C = _forward_solve(L, np.ascontiguousarray(Y.T))
    return 0.5 * (C + C.T)
