"""Composite quadrature on simplices.

Rules are built by collapsing the unit cube onto the reference simplex
(Duffy transform) and applying tensor Gauss-Legendre on ``s**d`` sub-cubes.
A polynomial of degree ``p`` on the simplex pulls back to degree at most
``p + d - 1`` per cube coordinate, so ``ceil((p + d) / 2)`` points per axis
integrate it exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import InvalidArgumentError, ResolutionError


@dataclass(frozen=True)
class QuadratureSpec:
    """Polynomial degree of the base rule and sub-divisions per element."""

    degree: int = 4
    subdivisions: int = 1

    def __post_init__(self):
        if self.degree < 1:
            raise InvalidArgumentError(f"quadrature degree must be >= 1, got {self.degree}")
        if self.subdivisions < 1:
            raise InvalidArgumentError(
                f"quadrature subdivisions must be >= 1, got {self.subdivisions}"
            )

    def resolves(self, lam: float, h: float) -> bool:
        """True when ``sqrt(lam) * h / s <= 1``."""
        return math.sqrt(max(lam, 0.0)) * h / self.subdivisions <= 1.0 + 1e-12

    def require(self, lam: float, h: float) -> None:
        if not self.resolves(lam, h):
            raise ResolutionError(
                f"quadrature with {self.subdivisions} subdivisions cannot resolve "
                f"frequency sqrt({lam:.6g}) on h={h:.6g}; need s >= "
                f"{math.ceil(math.sqrt(lam) * h)}"
            )

    @classmethod
    def for_frequency(cls, lam: float, h: float, degree: int = 4) -> "QuadratureSpec":
        """Smallest spec that resolves eigenvalue ``lam`` on mesh size ``h``."""
        s = max(1, math.ceil(math.sqrt(max(lam, 0.0)) * h - 1e-12))
        return cls(degree=degree, subdivisions=s)


@lru_cache(maxsize=64)
def reference_rule(dim: int, degree: int, subdivisions: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """Points and weights on the reference simplex ``{x >= 0, sum(x) <= 1}``.

    The weights sum to ``1 / dim!``.
    """
    m = math.ceil((degree + dim) / 2)
    g, gw = np.polynomial.legendre.leggauss(m)
    g = 0.5 * (g + 1.0)
    gw = 0.5 * gw
    s = subdivisions
    nodes = ((np.arange(s)[:, None] + g[None, :]) / s).ravel()
    weights = np.tile(gw, s) / s

    u = np.stack(np.meshgrid(*([nodes] * dim), indexing="ij"), axis=-1).reshape(-1, dim)
    wu = np.prod(
        np.stack(np.meshgrid(*([weights] * dim), indexing="ij"), axis=-1).reshape(-1, dim),
        axis=1,
    )
    x = np.empty_like(u)
    remaining = np.ones(u.shape[0])
    jac = np.ones(u.shape[0])
    for j in range(dim):
        x[:, j] = u[:, j] * remaining
        jac *= remaining
        remaining = remaining * (1.0 - u[:, j])
    x.setflags(write=False)
    w = wu * jac
    w.setflags(write=False)
    return x, w


@dataclass(frozen=True)
class CellQuadrature:
    """Physical quadrature points for every cell of a mesh.

    ``bary[q]`` are the barycentric coordinates of reference point ``q`` with
    respect to the cell's vertices in ``mesh.cells`` order, shared by all
    cells.
    """

    points: np.ndarray  # (n_cells, n_q, d)
    weights: np.ndarray  # (n_cells, n_q)
    bary: np.ndarray  # (n_q, d + 1)


@lru_cache(maxsize=16)
def cell_quadrature(mesh, quad: QuadratureSpec) -> CellQuadrature:
    """Quadrature points of every cell (cached per mesh object and spec)."""
    d = mesh.dim
    ref_x, ref_w = reference_rule(d, quad.degree, quad.subdivisions)
    x = mesh.vertices[mesh.cells]  # (nc, d+1, d)
    jac = x[:, 1:, :] - x[:, :1, :]
    det = np.abs(np.linalg.det(jac))
    points = x[:, :1, :] + np.einsum("qj,cjk->cqk", ref_x, jac)
    weights = det[:, None] * ref_w[None, :]
    bary = np.concatenate([1.0 - ref_x.sum(axis=1, keepdims=True), ref_x], axis=1)
    for a in (points, weights, bary):
        a.setflags(write=False)
    return CellQuadrature(points=points, weights=weights, bary=bary)
