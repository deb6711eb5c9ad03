"""Structured simplicial meshes of intervals, rectangles and boxes.

Rectangles are split into right triangles along one fixed diagonal and
boxes into six tetrahedra per cube (Kuhn/Freudenthal subdivision).  Both
are the same construction: a cube cell is cut into the simplices
``0 -> e_p0 -> e_p0 + e_p1 -> ... -> 1`` for every permutation ``p`` of the
axes, which makes the complex conforming on any tensor grid.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence, TextIO

import numpy as np

from .errors import InvalidArgumentError, InvalidMeshError


class DomainKind(str, enum.Enum):
    INTERVAL = "interval"
    RECTANGLE = "rectangle"
    BOX = "box"


class BoundaryCondition(str, enum.Enum):
    DIRICHLET = "dirichlet"
    NEUMANN = "neumann"


_KIND_BY_DIM = {1: DomainKind.INTERVAL, 2: DomainKind.RECTANGLE, 3: DomainKind.BOX}


@dataclass(frozen=True)
class DomainSpec:
    """Axis-aligned domain ``(0, L_1) x ... x (0, L_d)`` with a boundary condition."""

    kind: DomainKind
    lengths: tuple[float, ...]
    bc: BoundaryCondition = BoundaryCondition.DIRICHLET

    def __post_init__(self):
        kind = DomainKind(self.kind)
        bc = BoundaryCondition(self.bc)
        lengths = tuple(float(v) for v in self.lengths)
        if not 1 <= len(lengths) <= 3:
            raise InvalidArgumentError(f"domain dimension must be 1..3, got {len(lengths)}")
        if _KIND_BY_DIM[len(lengths)] is not kind:
            raise InvalidArgumentError(
                f"{kind.value} needs {list(_KIND_BY_DIM.values()).index(kind) + 1} lengths, "
                f"got {len(lengths)}"
            )
        if not all(math.isfinite(v) and v > 0 for v in lengths):
            raise InvalidArgumentError(f"domain lengths must be positive, got {lengths}")
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "bc", bc)
        object.__setattr__(self, "lengths", lengths)

    @classmethod
    def unit(cls, dim: int, bc="dirichlet") -> "DomainSpec":
        return cls(_KIND_BY_DIM[dim], (1.0,) * dim, bc)

    @property
    def dim(self) -> int:
        return len(self.lengths)

    @property
    def volume(self) -> float:
        return math.prod(self.lengths)

    def scaled(self, factor: float) -> "DomainSpec":
        return DomainSpec(self.kind, tuple(factor * v for v in self.lengths), self.bc)

    def with_bc(self, bc) -> "DomainSpec":
        return DomainSpec(self.kind, self.lengths, bc)


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Mesh:
    """Conforming simplicial mesh with boundary tags and DOF numbering.

    Attributes
    ----------
    domain : DomainSpec
        Domain the mesh covers; its boundary condition decides the DOFs.
    shape : tuple of int
        Subdivisions per axis.
    vertices : ndarray, shape (n_vertices, d)
        Lexicographically ordered grid points.
    cells : ndarray, shape (n_cells, d + 1)
        Positively oriented simplices.
    boundary_vertices : ndarray
        Sorted indices of the vertices on the boundary.
    dof_map : ndarray
        ``dof_map[v]`` is the DOF of vertex ``v`` or ``-1`` if eliminated.
    """

    domain: DomainSpec
    shape: tuple[int, ...]
    vertices: np.ndarray
    cells: np.ndarray
    boundary_vertices: np.ndarray
    dof_map: np.ndarray
    _dof_vertices: np.ndarray = field(repr=False)

    @property
    def dim(self) -> int:
        return self.vertices.shape[1]

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def n_cells(self) -> int:
        return self.cells.shape[0]

    @property
    def n_dofs(self) -> int:
        return self._dof_vertices.shape[0]

    @property
    def dof_vertices(self) -> np.ndarray:
        """Vertex index of each DOF (inverse of ``dof_map``)."""
        return self._dof_vertices

    @property
    def spacing(self) -> np.ndarray:
        return np.asarray(self.domain.lengths) / np.asarray(self.shape)

    def scaled(self, factor: float) -> "Mesh":
        return build_mesh(self.domain.scaled(factor), self.shape)

    def to_nodal(self, coefficients: np.ndarray) -> np.ndarray:
        """Expand a DOF vector to all vertices, zero on eliminated ones."""
        coefficients = np.asarray(coefficients, dtype=float)
        out = np.zeros(self.n_vertices)
        out[self._dof_vertices] = coefficients
        return out

    def locate(self, points: np.ndarray, return_axes: bool = False):
        """Find the simplex containing each point.

        Returns the vertex indices of the containing simplex (ordered along
        the Kuhn path, not necessarily as in ``cells``) and the matching
        barycentric coordinates.  With ``return_axes`` the axis stepped along
        each edge of the path is returned as well.  Points on shared faces go
        to one of the adjacent cells.
        """
        points = np.atleast_2d(np.asarray(points, dtype=float))
        shape = np.asarray(self.shape)
        t = points / self.spacing
        corner = np.clip(np.floor(t), 0, shape - 1).astype(np.int64)
        frac = t - corner
        order = np.argsort(-frac, axis=1, kind="stable")
        d = self.dim
        npts = points.shape[0]
        path = np.empty((npts, d + 1, d), dtype=np.int64)
        path[:, 0] = corner
        rows = np.arange(npts)
        for j in range(d):
            path[:, j + 1] = path[:, j]
            path[rows, j + 1, order[:, j]] += 1
        sorted_frac = np.take_along_axis(frac, order, axis=1)
        bary = np.empty((npts, d + 1))
        bary[:, 0] = 1.0 - sorted_frac[:, 0]
        bary[:, 1:d] = sorted_frac[:, :-1] - sorted_frac[:, 1:]
        bary[:, d] = sorted_frac[:, -1]
        verts = _grid_index(path, shape)
        if return_axes:
            return verts, bary, order
        return verts, bary


def _grid_index(ijk: np.ndarray, shape: np.ndarray) -> np.ndarray:
    """Lexicographic vertex index of integer grid coordinates (x slowest)."""
    idx = np.zeros(ijk.shape[:-1], dtype=np.int64)
    for axis in range(ijk.shape[-1]):
        idx = idx * (shape[axis] + 1) + ijk[..., axis]
    return idx


def _simplex_signed_volumes(vertices: np.ndarray, cells: np.ndarray) -> np.ndarray:
    d = vertices.shape[1]
    x = vertices[cells]
    jac = x[:, 1:, :] - x[:, :1, :]
    return np.linalg.det(jac) / math.factorial(d)


def build_mesh(domain: DomainSpec, n: int | Sequence[int]) -> Mesh:
    """Generate the structured mesh of ``domain`` with ``n`` cells per axis.

    Parameters
    ----------
    domain : DomainSpec
    n : int or sequence of int
        Subdivisions per axis; a scalar is used for every axis.
    """
    d = domain.dim
    if np.ndim(n) == 0:
        counts = (int(n),) * d
    else:
        counts = tuple(int(v) for v in n)
        if len(counts) == 1:
            counts = counts * d
    if len(counts) != d:
        raise InvalidArgumentError(f"need {d} subdivision counts, got {len(counts)}")
    if any(c < 1 for c in counts):
        raise InvalidArgumentError(f"subdivision counts must be >= 1, got {counts}")

    shape = np.asarray(counts)
    axes = [np.linspace(0.0, L, c + 1) for L, c in zip(domain.lengths, counts)]
    grid = np.meshgrid(*axes, indexing="ij")
    vertices = np.stack([g.ravel() for g in grid], axis=1)

    ijk = np.stack(
        np.meshgrid(*[np.arange(c + 1) for c in counts], indexing="ij"), axis=-1
    ).reshape(-1, d)
    on_boundary = np.any((ijk == 0) | (ijk == shape), axis=1)
    boundary = np.flatnonzero(on_boundary)

    corners = np.stack(
        np.meshgrid(*[np.arange(c) for c in counts], indexing="ij"), axis=-1
    ).reshape(-1, d)
    eye = np.eye(d, dtype=np.int64)
    paths = []
    for perm in itertools.permutations(range(d)):
        steps = np.zeros((d + 1, d), dtype=np.int64)
        for j, axis in enumerate(perm):
            steps[j + 1] = steps[j] + eye[axis]
        paths.append(steps)
    paths = np.asarray(paths)  # (d!, d+1, d)
    cell_ijk = corners[:, None, None, :] + paths[None, :, :, :]
    cells = _grid_index(cell_ijk, shape).reshape(-1, d + 1)

    vol = _simplex_signed_volumes(vertices, cells)
    flip = vol < 0
    if d > 1:
        cells[flip, -2:] = cells[flip, -1:-3:-1]
    elif np.any(flip):
        cells[flip] = cells[flip, ::-1]

    dof_map = np.arange(vertices.shape[0], dtype=np.int64)
    if domain.bc is BoundaryCondition.DIRICHLET:
        dof_map = np.full(vertices.shape[0], -1, dtype=np.int64)
        interior = np.flatnonzero(~on_boundary)
        dof_map[interior] = np.arange(interior.size)
    dof_vertices = np.flatnonzero(dof_map >= 0)

    return Mesh(
        domain=domain,
        shape=counts,
        vertices=_frozen(vertices),
        cells=_frozen(cells),
        boundary_vertices=_frozen(boundary),
        dof_map=_frozen(dof_map),
        _dof_vertices=_frozen(dof_vertices),
    )


@dataclass(frozen=True)
class MeshMetrics:
    """Element size measures.

    ``diameter`` is the diameter of each cell, ``size`` is ``|T|**(1/d)`` and
    ``inner_diameter`` the diameter of the inscribed ball.
    """

    h: float
    volume: np.ndarray
    diameter: np.ndarray
    size: np.ndarray
    inner_diameter: np.ndarray
    quasi_uniformity: float


def _facet_measures(x: np.ndarray) -> np.ndarray:
    """Measures of the d+1 facets of each simplex in ``x`` (n, d+1, d)."""
    ncell, nv, d = x.shape
    if d == 1:
        return np.ones((ncell, nv))
    out = np.empty((ncell, nv))
    for j in range(nv):
        facet = np.delete(x, j, axis=1)
        edges = facet[:, 1:, :] - facet[:, :1, :]
        gram = edges @ np.swapaxes(edges, 1, 2)
        out[:, j] = np.sqrt(np.abs(np.linalg.det(gram))) / math.factorial(d - 1)
    return out


def mesh_metrics(mesh: Mesh) -> MeshMetrics:
    d = mesh.dim
    x = mesh.vertices[mesh.cells]
    vol = _simplex_signed_volumes(mesh.vertices, mesh.cells)
    diff = x[:, :, None, :] - x[:, None, :, :]
    diam = np.sqrt((diff**2).sum(axis=-1)).max(axis=(1, 2))
    if np.any(vol <= 1e-14 * diam**d):
        bad = int(np.flatnonzero(vol <= 1e-14 * diam**d)[0])
        raise InvalidMeshError(f"cell {bad} is degenerate or inverted (volume {vol[bad]:g})")
    surface = _facet_measures(x).sum(axis=1)
    inner = 2.0 * d * vol / surface
    h = float(diam.max())
    return MeshMetrics(
        h=h,
        volume=vol,
        diameter=diam,
        size=vol ** (1.0 / d),
        inner_diameter=inner,
        quasi_uniformity=float(h / inner.min()),
    )


def boundary_dofs(mesh: Mesh, bc) -> frozenset[int]:
    """Vertices whose degrees of freedom are eliminated for ``bc``."""
    if BoundaryCondition(bc) is BoundaryCondition.DIRICHLET:
        return frozenset(int(v) for v in mesh.boundary_vertices)
    return frozenset()


def write_mesh(mesh: Mesh, fh: TextIO) -> None:
    fh.write("VERTICES\n")
    for v in mesh.vertices:
        fh.write(" ".join(repr(float(c)) for c in v) + "\n")
    fh.write("CELLS\n")
    for c in mesh.cells:
        fh.write(" ".join(str(int(i)) for i in c) + "\n")
    fh.write("BOUNDARY\n")
    for b in mesh.boundary_vertices:
        fh.write(f"{int(b)}\n")


def read_mesh(fh: TextIO) -> dict[str, np.ndarray]:
    """Parse the text dump written by :func:`write_mesh` into raw arrays."""
    sections: dict[str, list[list[str]]] = {}
    current = None
    for line in fh:
        line = line.strip()
        if not line:
            continue
        if line in ("VERTICES", "CELLS", "BOUNDARY"):
            current = sections.setdefault(line, [])
            continue
        if current is None:
            raise InvalidMeshError("mesh dump does not start with a section header")
        current.append(line.split())
    return {
        "vertices": np.array(sections.get("VERTICES", []), dtype=float),
        "cells": np.array(sections.get("CELLS", []), dtype=np.int64),
        "boundary": np.array([r[0] for r in sections.get("BOUNDARY", [])], dtype=np.int64),
    }
