import io
import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from weylfem.errors import InvalidArgumentError
from weylfem.mesh import (
    BoundaryCondition,
    DomainKind,
    DomainSpec,
    boundary_dofs,
    build_mesh,
    mesh_metrics,
    read_mesh,
    write_mesh,
)


def facet_counts(mesh):
    counts = Counter()
    for cell in mesh.cells:
        for j in range(len(cell)):
            counts[tuple(sorted(np.delete(cell, j)))] += 1
    return counts


def on_boundary(mesh, facet):
    x = mesh.vertices[list(facet)]
    L = np.asarray(mesh.domain.lengths)
    return any(np.allclose(x[:, a], 0) or np.allclose(x[:, a], L[a]) for a in range(mesh.dim))


def test_interval_counts():
    mesh = build_mesh(DomainSpec.unit(1), 4)
    assert (mesh.n_vertices, mesh.n_cells) == (5, 4)
    assert set(mesh.boundary_vertices.tolist()) == {0, 4}
    assert mesh.n_dofs == 3


def test_square_counts():
    mesh = build_mesh(DomainSpec.unit(2), (2, 2))
    assert (mesh.n_vertices, mesh.n_cells, mesh.n_dofs) == (9, 8, 1)
    assert np.allclose(mesh.vertices[mesh.dof_vertices[0]], [0.5, 0.5])
    assert len(mesh.boundary_vertices) == 8


def test_box_counts_and_conformity():
    mesh = build_mesh(DomainSpec.unit(3), (2, 2, 2))
    assert (mesh.n_vertices, mesh.n_cells, mesh.n_dofs) == (27, 48, 1)
    assert np.allclose(mesh.vertices[mesh.dof_vertices[0]], [0.5, 0.5, 0.5])


def test_vertices_lexicographic():
    mesh = build_mesh(DomainSpec(DomainKind.RECTANGLE, (2.0, 1.0)), (3, 2))
    keys = [tuple(v) for v in mesh.vertices]
    assert keys == sorted(keys)


def test_neumann_keeps_all_vertices():
    mesh = build_mesh(DomainSpec.unit(1, "neumann"), 4)
    assert mesh.n_dofs == 5
    assert boundary_dofs(mesh, "neumann") == frozenset()
    assert boundary_dofs(mesh, "dirichlet") == frozenset({0, 4})


def test_square_dirichlet_boundary_dofs():
    mesh = build_mesh(DomainSpec.unit(2), 2)
    assert len(boundary_dofs(mesh, BoundaryCondition.DIRICHLET)) == 8


@pytest.mark.parametrize("n", [0, -1, (2, 0)])
def test_rejects_bad_subdivisions(n):
    with pytest.raises(InvalidArgumentError):
        build_mesh(DomainSpec.unit(2), n)


@pytest.mark.parametrize("lengths", [(), (1.0, 0.0), (1.0, -2.0), (1, 1, 1, 1)])
def test_rejects_bad_domain(lengths):
    kind = {0: "interval", 2: "rectangle", 4: "box"}[len(lengths)]
    with pytest.raises(InvalidArgumentError):
        DomainSpec(kind, lengths)


def test_metrics_interval():
    m = mesh_metrics(build_mesh(DomainSpec.unit(1), 4))
    assert m.h == pytest.approx(0.25)
    assert m.quasi_uniformity == pytest.approx(1.0)


def test_metrics_square():
    m = mesh_metrics(build_mesh(DomainSpec.unit(2), 2))
    assert m.h == pytest.approx(math.sqrt(2) / 2, rel=1e-14)
    # inscribed diameter of a right isosceles triangle with legs 1/2
    assert np.allclose(m.inner_diameter, 1.0 - math.sqrt(2) / 2, rtol=1e-14)
    assert m.quasi_uniformity == pytest.approx(1 + math.sqrt(2), rel=1e-13)


def test_metrics_cube_inradius():
    # Kuhn tetrahedron of the unit cube: volume 1/6, faces two of area
    # 1/2 and two of area sqrt(2)/2
    m = mesh_metrics(build_mesh(DomainSpec.unit(3), 1))
    r = 3 * (1 / 6) / (1 + math.sqrt(2))
    assert np.allclose(m.inner_diameter, 2 * r, rtol=1e-13)
    assert np.allclose(m.diameter, math.sqrt(3))


@pytest.mark.parametrize("dim,n", [(1, 5), (2, 3), (3, 2)])
def test_metric_ordering(dim, n):
    m = mesh_metrics(build_mesh(DomainSpec.unit(dim), n))
    assert np.all(m.inner_diameter <= m.size + 1e-15)
    assert np.all(m.size <= m.diameter + 1e-15)
    assert np.all(m.diameter <= m.h + 1e-15)


@pytest.mark.parametrize("dim", [1, 2, 3])
def test_quasi_uniformity_independent_of_n(dim):
    q = [mesh_metrics(build_mesh(DomainSpec.unit(dim), n)).quasi_uniformity for n in (2, 4)]
    assert abs(q[0] - q[1]) < 1e-12


def test_scaling_doubles_lengths():
    mesh = build_mesh(DomainSpec.unit(2), 3)
    a, b = mesh_metrics(mesh), mesh_metrics(mesh.scaled(2.0))
    assert b.h == 2 * a.h
    assert np.array_equal(b.diameter, 2 * a.diameter)
    assert np.allclose(b.inner_diameter, 2 * a.inner_diameter, rtol=1e-15)
    assert b.quasi_uniformity == pytest.approx(a.quasi_uniformity, rel=1e-15)


shapes = st.integers(1, 3).flatmap(
    lambda d: st.tuples(st.just(d), st.lists(st.integers(1, 4), min_size=d, max_size=d),
                        st.lists(st.floats(0.25, 4.0), min_size=d, max_size=d))
)


@settings(max_examples=30, deadline=None)
@given(shapes)
def test_structure_properties(case):
    d, n, lengths = case
    kind = {1: "interval", 2: "rectangle", 3: "box"}[d]
    domain = DomainSpec(kind, tuple(lengths))
    mesh = build_mesh(domain, n)
    metrics = mesh_metrics(mesh)
    assert np.all(metrics.volume > 0)
    assert metrics.volume.sum() == pytest.approx(domain.volume, rel=1e-12)
    assert mesh.n_cells == math.factorial(d) * math.prod(n)
    for facet, count in facet_counts(mesh).items():
        assert count in (1, 2)
        assert (count == 1) == on_boundary(mesh, facet)
    boundary = {
        i for i, x in enumerate(mesh.vertices)
        if np.any(np.isclose(x, 0)) or np.any(np.isclose(x, lengths))
    }
    assert set(mesh.boundary_vertices.tolist()) == boundary


def test_locate_returns_containing_simplex():
    mesh = build_mesh(DomainSpec(DomainKind.BOX, (1.0, 2.0, 0.5)), (3, 2, 2))
    rng = np.random.default_rng(1)
    pts = rng.uniform(size=(200, 3)) * [1.0, 2.0, 0.5]
    verts, bary = mesh.locate(pts)
    assert np.all(bary >= -1e-14)
    assert np.allclose(bary.sum(axis=1), 1.0)
    assert np.allclose(np.einsum("pj,pjk->pk", bary, mesh.vertices[verts]), pts)
    cells = {tuple(sorted(c)) for c in mesh.cells.tolist()}
    assert all(tuple(sorted(v)) in cells for v in verts.tolist())


def test_mesh_is_read_only():
    mesh = build_mesh(DomainSpec.unit(2), 2)
    with pytest.raises(ValueError):
        mesh.vertices[0, 0] = 1.0


def test_dump_round_trip():
    mesh = build_mesh(DomainSpec.unit(2), 3)
    buf = io.StringIO()
    write_mesh(mesh, buf)
    text = buf.getvalue()
    assert text.startswith("VERTICES\n") and "\nCELLS\n" in text and "\nBOUNDARY\n" in text
    back = read_mesh(io.StringIO(text))
    assert np.array_equal(back["vertices"], mesh.vertices)
    assert np.array_equal(back["cells"], mesh.cells)
    assert np.array_equal(back["boundary"], mesh.boundary_vertices)
