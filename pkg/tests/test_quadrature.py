import itertools
import math

import numpy as np
import pytest

from weylfem.errors import InvalidArgumentError, ResolutionError
from weylfem.mesh import DomainSpec, build_mesh
from weylfem.quadrature import QuadratureSpec, cell_quadrature, reference_rule


def simplex_moment(powers):
    """Exact integral of prod x_i^a_i over the unit reference simplex."""
    d = len(powers)
    return math.prod(math.factorial(a) for a in powers) / math.factorial(sum(powers) + d)


@pytest.mark.parametrize("dim", [1, 2, 3])
@pytest.mark.parametrize("degree", [1, 2, 4, 6])
@pytest.mark.parametrize("subdiv", [1, 3])
def test_reference_rule_exact_to_degree(dim, degree, subdiv):
    pts, wts = reference_rule(dim, degree, subdiv)
    assert np.all(wts > 0)
    assert np.all(pts >= 0) and np.all(pts.sum(axis=1) <= 1 + 1e-15)
    for powers in itertools.product(range(degree + 1), repeat=dim):
        if sum(powers) > degree:
            continue
        approx = np.sum(wts * np.prod(pts ** np.array(powers), axis=1))
        assert approx == pytest.approx(simplex_moment(powers), rel=1e-13, abs=1e-16)


@pytest.mark.parametrize("dim", [1, 2, 3])
def test_cell_weights_sum_to_volume(dim):
    domain = DomainSpec({1: "interval", 2: "rectangle", 3: "box"}[dim], (2.0, 1.5, 0.5)[:dim])
    cq = cell_quadrature(build_mesh(domain, 3), QuadratureSpec(4, 2))
    assert cq.weights.sum() == pytest.approx(domain.volume, rel=1e-13)
    assert np.allclose(cq.bary.sum(axis=1), 1.0)


def test_composite_rule_converges_on_oscillatory_integrand():
    mesh = build_mesh(DomainSpec.unit(1), 2)
    exact = (1 - math.cos(40.0)) / 40.0  # integral of sin(40 x) over (0, 1)
    errs = []
    for s in (1, 2, 4, 8, 16):
        cq = cell_quadrature(mesh, QuadratureSpec(4, s))
        errs.append(abs(np.sum(cq.weights * np.sin(40 * cq.points[..., 0])) - exact))
    assert errs[-1] < 1e-7
    assert all(b < a for a, b in zip(errs, errs[1:]))


def test_resolution_rule():
    h = 0.1
    assert QuadratureSpec(4, 1).resolves(100.0, h)
    assert not QuadratureSpec(4, 1).resolves(400.0, h)
    spec = QuadratureSpec.for_frequency(400.0, h)
    assert spec.subdivisions == 2 and spec.resolves(400.0, h)
    with pytest.raises(ResolutionError):
        QuadratureSpec(4, 1).require(400.0, h)


@pytest.mark.parametrize("kwargs", [{"degree": 0}, {"subdivisions": 0}])
def test_invalid_spec(kwargs):
    with pytest.raises(InvalidArgumentError):
        QuadratureSpec(**kwargs)
