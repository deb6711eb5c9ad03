import io
import math

import numpy as np
import pytest
import scipy.integrate
import scipy.sparse as sp

from weylfem.assembly import (
    CoefficientField,
    assemble_energy_load,
    assemble_load,
    assemble_mass,
    assemble_stiffness,
    solve_source,
    write_coo,
)
from weylfem.errors import CoefficientError, ConsistencyError
from weylfem.linalg import cholesky
from weylfem.mesh import DomainSpec, build_mesh, mesh_metrics
from weylfem.projection import FEFunction
from weylfem.quadrature import QuadratureSpec, cell_quadrature


def dense(a):
    return a.toarray()


def test_interval_n2():
    mesh = build_mesh(DomainSpec.unit(1), 2)
    assert np.array_equal(dense(assemble_stiffness(mesh)), [[4.0]])
    assert dense(assemble_mass(mesh))[0, 0] == pytest.approx(1 / 3, rel=1e-15)


def test_square_n2():
    mesh = build_mesh(DomainSpec.unit(2), 2)
    assert dense(assemble_stiffness(mesh))[0, 0] == pytest.approx(4.0, rel=1e-15)
    assert dense(assemble_mass(mesh))[0, 0] == pytest.approx(0.125, rel=1e-15)


def test_square_five_point_stencil():
    mesh = build_mesh(DomainSpec.unit(2), 4)
    A = dense(assemble_stiffness(mesh))
    centre = int(np.flatnonzero(np.all(np.isclose(mesh.vertices[mesh.dof_vertices], 0.5), axis=1))[0])
    row = A[centre]
    assert row[centre] == pytest.approx(4.0)
    assert sorted(np.round(row[row != 0], 12)) == [-1.0] * 4 + [4.0]


def test_interval_tridiagonal():
    n = 8
    h = 1 / n
    mesh = build_mesh(DomainSpec.unit(1), n)
    A, M = dense(assemble_stiffness(mesh)), dense(assemble_mass(mesh))
    N = n - 1
    A_ref = (2 * np.eye(N) - np.eye(N, k=1) - np.eye(N, k=-1)) / h
    M_ref = h / 6 * (4 * np.eye(N) + np.eye(N, k=1) + np.eye(N, k=-1))
    assert np.allclose(A, A_ref, rtol=1e-14, atol=1e-12)
    assert np.allclose(M, M_ref, rtol=1e-14, atol=1e-16)


@pytest.mark.parametrize("dim,n", [(1, 7), (2, 5), (3, 3)])
def test_exact_symmetry_and_definiteness(dim, n):
    mesh = build_mesh(DomainSpec.unit(dim), n)
    for matrix in (assemble_stiffness(mesh), assemble_mass(mesh)):
        assert (matrix - matrix.T).count_nonzero() == 0
        a = dense(matrix)
        L = cholesky(a)
        assert np.diag(L).min() ** 2 > 1e-14 * np.diag(a).max()


@pytest.mark.parametrize("dim,n", [(1, 6), (2, 4), (3, 2)])
def test_neumann_null_space_and_mass_total(dim, n):
    domain = DomainSpec({1: "interval", 2: "rectangle", 3: "box"}[dim], (1.5, 0.5, 2.0)[:dim], "neumann")
    mesh = build_mesh(domain, n)
    A = assemble_stiffness(mesh)
    M = assemble_mass(mesh)
    ones = np.ones(mesh.n_dofs)
    assert np.abs(A @ ones).max() <= 1e-12 * np.abs(A).max()
    assert M.sum() == pytest.approx(domain.volume, rel=1e-12)


def test_coefficient_scaling_is_exact():
    mesh = build_mesh(DomainSpec.unit(2), 5)
    A1 = assemble_stiffness(mesh)
    A4 = assemble_stiffness(mesh, CoefficientField.scalar(4.0, 2))
    assert np.array_equal(A4.data, 4.0 * A1.data)
    assert np.array_equal(A4.indices, A1.indices)


def test_anisotropic_coefficient_energy_of_linear_functions():
    mesh = build_mesh(DomainSpec.unit(2, "neumann"), 3)
    alpha = CoefficientField.constant([[2.0, 0.5], [0.5, 1.0]])
    A = dense(assemble_stiffness(mesh, alpha))
    x, y = mesh.vertices[:, 0], mesh.vertices[:, 1]
    # linear functions lie in the P1 space, so a(u, v) = grad u . alpha grad v
    assert x @ A @ x == pytest.approx(2.0, rel=1e-13)
    assert x @ A @ y == pytest.approx(0.5, rel=1e-13)
    assert y @ A @ y == pytest.approx(1.0, rel=1e-13)


def test_assembly_is_bit_reproducible():
    mesh = build_mesh(DomainSpec.unit(3), 3)
    a, b = assemble_stiffness(mesh), assemble_stiffness(mesh)
    assert a.data.tobytes() == b.data.tobytes()
    assert a.indices.tobytes() == b.indices.tobytes()


def test_coefficient_validation():
    mesh = build_mesh(DomainSpec.unit(2), 2)

    def skew(points):
        return np.broadcast_to([[1.0, 0.5], [0.0, 1.0]], (len(points), 2, 2))

    with pytest.raises(CoefficientError):
        assemble_stiffness(mesh, CoefficientField(skew, (0.5, 2.0)))
    with pytest.raises(CoefficientError):
        assemble_stiffness(mesh, CoefficientField.constant([[1.0, 0.0], [0.0, -1.0]]))

    def varying(points):
        c = 1.0 + points[:, 0]
        return c[:, None, None] * np.eye(2)

    with pytest.raises(CoefficientError):
        assemble_stiffness(mesh, CoefficientField(varying, (1.0, 1.2)))
    assemble_stiffness(mesh, CoefficientField(varying, (1.0, 2.0)))


def test_load_of_constant_is_partition_of_unity():
    domain = DomainSpec.unit(2, "neumann")
    mesh = build_mesh(domain, 4)
    b = assemble_load(mesh, lambda p: np.ones(len(p)))
    M = assemble_mass(mesh)
    assert np.allclose(b, M @ np.ones(mesh.n_dofs), rtol=1e-13)
    assert b.sum() == pytest.approx(1.0, rel=1e-13)


def test_load_of_hat_is_mass_column():
    mesh = build_mesh(DomainSpec.unit(2), 4)
    M = dense(assemble_mass(mesh))
    j = 4
    b = assemble_load(mesh, FEFunction.hat(mesh, j))
    assert np.allclose(b, M[:, j], atol=1e-14)


def test_load_against_adaptive_quadrature():
    n = 4
    mesh = build_mesh(DomainSpec.unit(1), n)
    b = assemble_load(mesh, lambda p: np.sin(math.pi * p[:, 0]), QuadratureSpec(12))
    for i, xi in enumerate(mesh.vertices[mesh.dof_vertices, 0]):
        def integrand(x):
            return math.sin(math.pi * x) * max(0.0, 1.0 - abs(x - xi) * n)

        ref = sum(scipy.integrate.quad(integrand, a, a + 1 / n, epsabs=1e-14)[0]
                  for a in (xi - 1 / n, xi))
        assert b[i] == pytest.approx(ref, abs=1e-10)


def test_energy_load_of_fe_function_is_a_times_coefficients():
    mesh = build_mesh(DomainSpec.unit(2), 4)
    A = assemble_stiffness(mesh)
    c = np.random.default_rng(3).standard_normal(mesh.n_dofs)
    g = assemble_energy_load(mesh, FEFunction(mesh, c).grad)
    assert np.allclose(g, A @ c, atol=1e-12)


def test_solve_source_examples():
    A = sp.csr_matrix([[4.0]])
    assert solve_source(A, [1.0])[0] == pytest.approx(0.25)
    mesh = build_mesh(DomainSpec.unit(2), 8)
    A = assemble_stiffness(mesh)
    x = np.random.default_rng(0).standard_normal(mesh.n_dofs)
    assert np.allclose(solve_source(A, A @ x, tol=1e-12), x, rtol=1e-8, atol=1e-8)


def test_solve_source_neumann():
    mesh = build_mesh(DomainSpec.unit(1, "neumann"), 16)
    A, M = assemble_stiffness(mesh), assemble_mass(mesh)
    b = assemble_load(mesh, lambda p: np.cos(math.pi * p[:, 0]))
    mu = solve_source(A, b, bc="neumann", M=M, tol=1e-12)
    assert np.linalg.norm(A @ mu - b) <= 1e-10 * np.linalg.norm(b)
    assert abs(np.ones_like(mu) @ (M @ mu)) < 1e-14
    with pytest.raises(ConsistencyError):
        solve_source(A, b + 1.0, bc="neumann")


def test_poisson_refinement_order_two():
    errors = []
    for n in (8, 16, 32, 64):
        mesh = build_mesh(DomainSpec.unit(1), n)
        A = assemble_stiffness(mesh)
        b = assemble_load(mesh, lambda p: math.pi**2 * np.sin(math.pi * p[:, 0]), QuadratureSpec(8))
        mu = solve_source(A, b, tol=1e-13)
        cq = cell_quadrature(mesh, QuadratureSpec(8, 2))
        uh = mesh.to_nodal(mu)[mesh.cells] @ cq.bary.T
        exact = np.sin(math.pi * cq.points[..., 0])
        errors.append(math.sqrt(np.sum(cq.weights * (uh - exact) ** 2)))
        assert mesh_metrics(mesh).h == pytest.approx(1 / n)
    rates = [math.log2(a / b) for a, b in zip(errors, errors[1:])]
    assert all(abs(r - 2.0) < 0.05 for r in rates)


def test_write_coo():
    mesh = build_mesh(DomainSpec.unit(1), 3)
    buf = io.StringIO()
    write_coo(assemble_stiffness(mesh), buf)
    rows = [line.split() for line in buf.getvalue().splitlines()]
    assert [(int(r), int(c)) for r, c, _ in rows] == [(0, 0), (0, 1), (1, 0), (1, 1)]
    assert float(rows[0][2]) == pytest.approx(6.0)
