import math

import numpy as np
import pytest
import scipy.linalg
import scipy.sparse as sp

from weylfem.assembly import assemble_mass, assemble_stiffness
from weylfem.errors import DimensionError, FactorizationError, InvalidArgumentError, IterationLimitError
from weylfem.linalg import (
    cg_solve,
    cholesky,
    dense_generalized_eig,
    reduced_matrix,
    spmv,
    symmetric_eig,
)
from weylfem.mesh import DomainSpec, build_mesh


def closed_form(n, k):
    h = 1.0 / n
    t = np.asarray(k) * math.pi * h
    return 6 / h**2 * (1 - np.cos(t)) / (2 + np.cos(t))


def pencil(dim, n, bc="dirichlet"):
    mesh = build_mesh(DomainSpec.unit(dim, bc), n)
    return assemble_stiffness(mesh), assemble_mass(mesh)


def random_spd(n, seed):
    B = np.random.default_rng(seed).standard_normal((n, n))
    return B @ B.T + n * np.eye(n)


def test_spmv_examples():
    x = np.arange(5.0)
    assert np.array_equal(spmv(sp.identity(5, format="csr"), x), x)
    assert spmv(sp.csr_matrix([[4.0]]), np.array([2.0]))[0] == 8.0
    rng = np.random.default_rng(0)
    A = sp.random(100, 100, density=0.05, random_state=1, format="csr")
    x = rng.standard_normal(100)
    ref = A.toarray() @ x
    assert np.abs(spmv(A, x) - ref).max() <= 1e-13 * np.abs(A).max() * np.abs(x).max() * 100
    with pytest.raises(DimensionError):
        spmv(A, np.ones(3))


def test_cg_identity_one_iteration():
    b = np.arange(1.0, 6.0)
    x, its = cg_solve(sp.identity(5, format="csr"), b)
    assert its == 1 and np.allclose(x, b)


def test_cg_dirichlet_and_neumann():
    A, _ = pencil(1, 64)
    b = np.random.default_rng(2).standard_normal(A.shape[0])
    x, its = cg_solve(A, b, tol=1e-10)
    assert its <= 200
    assert np.linalg.norm(A @ x - b) <= 1e-10 * np.linalg.norm(b)

    An, _ = pencil(1, 32, "neumann")
    b = np.random.default_rng(3).standard_normal(An.shape[0])
    b -= b.mean()
    x, _ = cg_solve(An, b, tol=1e-10, deflate_constants=True)
    assert abs(x.mean()) < 1e-12
    assert np.linalg.norm(An @ x - b) <= 1e-10 * np.linalg.norm(b)


def test_cg_iteration_limit():
    A, _ = pencil(1, 64)
    with pytest.raises(IterationLimitError) as info:
        cg_solve(A, np.ones(A.shape[0]), tol=1e-14, maxiter=3)
    assert info.value.iterations == 3


def test_cholesky_matches_scipy_and_rejects_indefinite():
    a = random_spd(30, 4)
    assert np.allclose(cholesky(a), scipy.linalg.cholesky(a, lower=True), rtol=1e-12, atol=1e-12)
    with pytest.raises(FactorizationError):
        cholesky(np.diag([1.0, -1.0]))


@pytest.mark.parametrize("method", ["jacobi", "ql"])
@pytest.mark.parametrize("n", [1, 2, 17, 60])
def test_symmetric_eig_against_lapack(method, n):
    B = np.random.default_rng(n).standard_normal((n, n))
    a = B + B.T
    vals, vecs = symmetric_eig(a, method=method)
    ref = np.linalg.eigvalsh(a)
    scale = np.abs(ref).max()
    assert np.allclose(vals, ref, rtol=0, atol=1e-12 * scale)
    assert np.allclose(vecs.T @ vecs, np.eye(n), atol=1e-12)
    assert np.allclose(a @ vecs, vecs * vals, atol=1e-11 * scale)


def test_symmetric_eig_permutation():
    vals, vecs = symmetric_eig(np.diag([3.0, 1.0, 2.0]))
    assert np.array_equal(vals, [1.0, 2.0, 3.0])
    assert np.allclose(np.abs(vecs), np.eye(3)[:, [1, 2, 0]])
    with pytest.raises(InvalidArgumentError):
        symmetric_eig(np.eye(2), method="qr")


def test_generalized_small_examples():
    r = dense_generalized_eig(np.array([[4.0]]), np.array([[1 / 3]]))
    assert r.values[0] == pytest.approx(12.0, rel=1e-14)
    assert r.values[0] == pytest.approx(closed_form(2, 1), rel=1e-14)
    r = dense_generalized_eig(np.diag([3.0, 1.0, 2.0]), np.eye(3))
    assert np.allclose(r.values, [1, 2, 3])


@pytest.mark.parametrize("n", [16, 64])
def test_generalized_interval_closed_form(n):
    A, M = pencil(1, n)
    r = dense_generalized_eig(A, M)
    exact = closed_form(n, np.arange(1, n))
    assert np.max(np.abs(r.values - exact) / exact) <= 1e-10


@pytest.mark.parametrize("dim,n,method", [(2, 6, "auto"), (2, 6, "ql"), (3, 3, "jacobi")])
def test_generalized_contracts(dim, n, method):
    A, M = pencil(dim, n)
    Ad, Md = A.toarray(), M.toarray()
    r = dense_generalized_eig(A, M, method=method)
    assert np.all(np.diff(r.values) >= 0)
    X = r.vectors
    assert np.abs(X.T @ Md @ X - np.eye(len(r.values))).max() <= 1e-10
    norm_a, norm_m = np.linalg.norm(Ad), np.linalg.norm(Md)
    res = np.linalg.norm(Ad @ X - Md @ X * r.values, axis=0)
    assert np.all(res <= 1e-10 * (norm_a + np.abs(r.values) * norm_m))
    assert r.values.sum() == pytest.approx(np.trace(reduced_matrix(A, M)), rel=1e-10)
    ref = scipy.linalg.eigh(Ad, Md, eigvals_only=True)
    assert np.allclose(r.values, ref, rtol=1e-11)


def test_generalized_errors():
    with pytest.raises(FactorizationError):
        dense_generalized_eig(np.eye(2), np.diag([1.0, 0.0]))
    with pytest.raises(InvalidArgumentError):
        dense_generalized_eig(np.eye(5), np.eye(5), cap=4)
    with pytest.raises(DimensionError):
        dense_generalized_eig(np.eye(2), np.eye(3))
