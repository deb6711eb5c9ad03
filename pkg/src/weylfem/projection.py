"""L2 and elliptic projections onto P1 spaces and the eigenvalue error bound.

Analytic functions are callables on points of shape ``(P, d)`` that also
provide ``grad(points) -> (P, d)``; :class:`~weylfem.spectra.Eigenfunction`
and :class:`FEFunction` both qualify.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .assembly import (
    CoefficientField,
    assemble_energy_load,
    assemble_load,
    assemble_mass,
    assemble_stiffness,
    p1_geometry,
)
from .assembly import _scatter as _scatter_local
from .eigensolver import smallest_eigenpairs
from .errors import InvalidArgumentError
from .linalg import cg_solve, symmetric_eig
from .mesh import BoundaryCondition, DomainSpec, Mesh, build_mesh, mesh_metrics
from .quadrature import QuadratureSpec, cell_quadrature
from .report import VerificationReport
from .spectra import EigenfunctionCombination, Eigenfunction, continuous_spectrum

LOWER_Q_FACTOR = 1.0 - math.sqrt(2.0) / 2.0
SOLVE_TOL = 1e-13


class Projector(str, enum.Enum):
    L2 = "qh"
    ELLIPTIC = "ph"


class FEFunction:
    """P1 function given by its DOF coefficients, evaluable anywhere in the domain."""

    def __init__(self, mesh: Mesh, coefficients):
        self.mesh = mesh
        self.coefficients = np.asarray(coefficients, dtype=float)
        self.nodal = mesh.to_nodal(self.coefficients)

    @classmethod
    def hat(cls, mesh: Mesh, dof: int) -> "FEFunction":
        c = np.zeros(mesh.n_dofs)
        c[dof] = 1.0
        return cls(mesh, c)

    @classmethod
    def interpolate(cls, mesh: Mesh, w) -> "FEFunction":
        return cls(mesh, np.asarray(w(mesh.vertices[mesh.dof_vertices]), dtype=float))

    def __call__(self, points):
        verts, bary = self.mesh.locate(points)
        return (self.nodal[verts] * bary).sum(axis=1)

    def grad(self, points):
        verts, _, axes = self.mesh.locate(points, return_axes=True)
        h = self.mesh.spacing
        jumps = self.nodal[verts[:, 1:]] - self.nodal[verts[:, :-1]]
        out = np.zeros((verts.shape[0], self.mesh.dim))
        rows = np.arange(verts.shape[0])
        for j in range(self.mesh.dim):
            out[rows, axes[:, j]] = jumps[:, j] / h[axes[:, j]]
        return out


@dataclass
class ProjectionResult:
    """Projection coefficients and the error norms measured by quadrature."""

    coefficients: np.ndarray
    l2_error: float
    h1_semi_error: float
    h1_semi_proj: float
    h1_semi_w: float
    l2_proj: float = 0.0
    l2_w: float = 0.0
    iterations: int = 0


@dataclass
class _Sampled:
    """Values and gradients of ``w`` and of an FE function at all quadrature points."""

    weights: np.ndarray  # (nc, nq)
    w: np.ndarray
    grad_w: np.ndarray
    uh: np.ndarray
    grad_uh: np.ndarray


def _sample(mesh: Mesh, coefficients, w, quad: QuadratureSpec) -> _Sampled:
    cq = cell_quadrature(mesh, quad)
    nc, nq, d = cq.points.shape
    pts = cq.points.reshape(-1, d)
    wv = np.asarray(w(pts), dtype=float).reshape(nc, nq)
    gw = np.asarray(w.grad(pts), dtype=float).reshape(nc, nq, d)
    nodal = mesh.to_nodal(coefficients)[mesh.cells]  # (nc, d+1)
    uh = nodal @ cq.bary.T
    _, grads = p1_geometry(mesh)
    guh = np.einsum("cj,cjk->ck", nodal, grads)
    return _Sampled(cq.weights, wv, gw, uh, np.broadcast_to(guh[:, None, :], gw.shape))


def _norms(mesh: Mesh, coefficients, w, quad: QuadratureSpec, iterations=0) -> ProjectionResult:
    s = _sample(mesh, coefficients, w, quad)
    wt = s.weights

    def l2(f):
        return math.sqrt(max(float((wt * f**2).sum()), 0.0))

    def h1(g):
        return math.sqrt(max(float((wt * (g**2).sum(axis=-1)).sum()), 0.0))

    return ProjectionResult(
        coefficients=np.asarray(coefficients),
        l2_error=l2(s.w - s.uh),
        h1_semi_error=h1(s.grad_w - s.grad_uh),
        h1_semi_proj=h1(s.grad_uh),
        h1_semi_w=h1(s.grad_w),
        l2_proj=l2(s.uh),
        l2_w=l2(s.w),
        iterations=iterations,
    )


def l2_project(mesh: Mesh, M, w, quad: QuadratureSpec = QuadratureSpec(), tol=SOLVE_TOL) -> ProjectionResult:
    """L2 projection: solve ``M c = b`` with ``b_i = (w, phi_i)``."""
    b = assemble_load(mesh, w, quad)
    c, its = cg_solve(M, b, tol=tol)
    return _norms(mesh, c, w, quad, its)


def elliptic_project(mesh: Mesh, A, w, quad: QuadratureSpec = QuadratureSpec(),
                     alpha: CoefficientField | None = None, tol=SOLVE_TOL) -> ProjectionResult:
    """Elliptic projection: solve ``A c = g`` with ``g_i = a(w, phi_i)``.

    Only the Dirichlet problem is supported (``A`` must be SPD).
    """
    if mesh.domain.bc is not BoundaryCondition.DIRICHLET:
        raise InvalidArgumentError("elliptic projection needs the Dirichlet problem")
    g = assemble_energy_load(mesh, w.grad, quad, alpha)
    c, its = cg_solve(A, g, tol=tol)
    return _norms(mesh, c, w, quad, its)


def project(projector, mesh, w, quad, A=None, M=None) -> ProjectionResult:
    projector = Projector(projector)
    if projector is Projector.L2:
        return l2_project(mesh, assemble_mass(mesh) if M is None else M, w, quad)
    return elliptic_project(mesh, assemble_stiffness(mesh) if A is None else A, w, quad)


# ------------------------------------------------------------------- constants


def _ladder_indices(domain: DomainSpec, shape, points: int) -> list[tuple[int, ...]]:
    """Modes stepping one axis (or all axes together) up to the mesh resolution."""
    start = 1 if domain.bc is BoundaryCondition.DIRICHLET else 0
    d = domain.dim
    out: list[tuple[int, ...]] = []
    for axis in list(range(d)) + [None]:
        top = min(shape) if axis is None else shape[axis]
        for j in np.unique(np.linspace(1, top, min(points, top)).round().astype(int)):
            idx = [start] * d
            if axis is None:
                idx = [int(j)] * d
            else:
                idx[axis] = int(j)
            out.append(tuple(idx))
    return list(dict.fromkeys(out))


def constant_samples(domain: DomainSpec, K: int = 8, n_random: int = 8, seed: int = 0,
                     shape=None, ladder: int = 16):
    """Sample functions for measuring projection constants.

    The first ``K`` eigenfunctions, ``n_random`` random unit-norm
    combinations of them and, when a mesh ``shape`` is given, a ladder of up
    to ``ladder`` modes per direction reaching the grid resolution (the
    suprema are attained at mesh-scale frequencies).
    """
    spec = continuous_spectrum(domain, K)
    samples = [Eigenfunction(domain, idx) for idx in spec.indices]
    rng = np.random.default_rng(seed)
    for _ in range(n_random):
        coef = rng.standard_normal(K)
        coef /= np.linalg.norm(coef)
        samples.append(EigenfunctionCombination(domain, spec.indices, coef))
    if shape is not None:
        seen = {tuple(int(i) for i in idx) for idx in spec.indices}
        for idx in _ladder_indices(domain, shape, ladder):
            if idx not in seen:
                samples.append(Eigenfunction(domain, idx))
    return samples


@dataclass
class ConstantsEstimate:
    """Measured stability and approximation constants of a projector.

    ``c1`` uses ``|Pi w|_1 <= c1 |w|_1``; ``c1_squared_form`` is the ratio
    ``|Pi w|_1 / |w|_1^2`` for the squared form of the same bound.
    """

    projector: Projector
    c1: float
    c2: float
    c1_squared_form: float
    rows: list[dict] = field(default_factory=list)

    def per_mesh(self, key: str) -> dict[int, float]:
        out: dict[int, float] = {}
        for row in self.rows:
            out[row["n"]] = max(out.get(row["n"], 0.0), row[key])
        return out


def _quadrature(lam: float, h: float, degree: int, subdivisions: int | None) -> QuadratureSpec:
    """Automatic spec for ``lam`` or a fixed one that must resolve it."""
    if subdivisions is None:
        return QuadratureSpec.for_frequency(lam, h, degree)
    quad = QuadratureSpec(degree, subdivisions)
    quad.require(lam, h)
    return quad


def estimate_constants(domain: DomainSpec, ns, samples=None, projector="qh",
                       quad_degree: int = 4, seed: int = 0,
                       quad_subdiv: int | None = None) -> ConstantsEstimate:
    """Max of ``|Pi w|_1/|w|_1`` and ``||w - Pi w||_0^2/(h^2 |w|_1^2)`` over samples and meshes.

    Without explicit ``samples`` each mesh gets :func:`constant_samples`
    including its resolution ladder.  Samples with ``|w|_1 = 0`` (the
    Neumann constant mode) are skipped.
    """
    projector = Projector(projector)
    given = None if samples is None else list(samples)
    rows = []
    for n in ns:
        mesh = build_mesh(domain, n)
        h = mesh_metrics(mesh).h
        samples = given if given is not None else constant_samples(domain, seed=seed, shape=mesh.shape)
        A = assemble_stiffness(mesh) if projector is Projector.ELLIPTIC else None
        M = assemble_mass(mesh) if projector is Projector.L2 else None
        for i, w in enumerate(samples):
            quad = _quadrature(getattr(w, "eigenvalue", 0.0), h, quad_degree, quad_subdiv)
            res = project(projector, mesh, w, quad, A=A, M=M)
            if res.h1_semi_w <= 1e-12:
                continue
            rows.append(
                {
                    "n": n if np.ndim(n) == 0 else tuple(n),
                    "h": h,
                    "sample": i,
                    "c1": res.h1_semi_proj / res.h1_semi_w,
                    "c1_squared_form": res.h1_semi_proj / res.h1_semi_w**2,
                    "c2": res.l2_error**2 / (h**2 * res.h1_semi_w**2),
                    "l2_error": res.l2_error,
                    "h1_semi_error": res.h1_semi_error,
                }
            )
    if not rows:
        raise InvalidArgumentError("no sample with non-zero H1 seminorm")
    return ConstantsEstimate(
        projector=projector,
        c1=max(r["c1"] for r in rows),
        c2=max(r["c2"] for r in rows),
        c1_squared_form=max(r["c1_squared_form"] for r in rows),
        rows=rows,
    )


# ----------------------------------------------------------------- error bound


@dataclass
class ErrorBound:
    """Exact extrema of the projection error over ``W_k``, ``||w||_0 = 1``.

    ``sup_h1`` is the supremum of ``|(I - Q_h) w|_1``; ``inf_l2_proj`` the
    infimum of ``||Q_h w||_0``; ``sup_l2_err_sq`` the supremum of
    ``||(I - Q_h) w||_0^2``.  ``diag_h1`` holds ``|(I - Q_h) phi_j|_1``.
    """

    k: int
    sup_h1: float
    inf_l2_proj: float
    sup_l2_err_sq: float
    diag_h1: np.ndarray
    gram: np.ndarray


def _eigenfunction_projections(mesh, M, functions, quad):
    d = mesh.dim
    cq = cell_quadrature(mesh, quad)
    nc, nq, _ = cq.points.shape
    pts = cq.points.reshape(-1, d)
    _, grads = p1_geometry(mesh)
    err_grad, err_val, proj_val = [], [], []
    for w in functions:
        b = assemble_load(mesh, w, quad)
        c, _ = cg_solve(M, b, tol=SOLVE_TOL)
        nodal = mesh.to_nodal(c)[mesh.cells]
        uh = nodal @ cq.bary.T
        guh = np.einsum("cj,cjk->ck", nodal, grads)[:, None, :]
        wv = np.asarray(w(pts)).reshape(nc, nq)
        gw = np.asarray(w.grad(pts)).reshape(nc, nq, d)
        err_grad.append((gw - guh).reshape(-1, d))
        err_val.append((wv - uh).ravel())
        proj_val.append(uh.ravel())
    return cq.weights.ravel(), np.array(err_grad), np.array(err_val), np.array(proj_val)


def error_bound_terms(mesh: Mesh, k: int, quad: QuadratureSpec | None = None, M=None) -> ErrorBound:
    """Gram matrices of the L2-projection error over the first ``k`` eigenfunctions.

    Because the eigenfunctions are L2-orthonormal, the supremum over unit
    ``w`` in their span is the square root of the largest eigenvalue of
    ``G_ij = ((I - Q_h) phi_i, (I - Q_h) phi_j)_1``.
    """
    if k < 1:
        raise InvalidArgumentError(f"k must be >= 1, got {k}")
    spec = continuous_spectrum(mesh.domain, k)
    h = mesh_metrics(mesh).h
    quad = QuadratureSpec.for_frequency(spec.values[-1], h) if quad is None else quad
    quad.require(spec.values[-1], h)
    M = assemble_mass(mesh) if M is None else M
    functions = [Eigenfunction(mesh.domain, idx) for idx in spec.indices]
    wt, eg, ev, pv = _eigenfunction_projections(mesh, M, functions, quad)
    G = np.einsum("q,iqk,jqk->ij", wt, eg, eg)
    E0 = np.einsum("q,iq,jq->ij", wt, ev, ev)
    N0 = np.einsum("q,iq,jq->ij", wt, pv, pv)
    g_vals, _ = symmetric_eig(G)
    e_vals, _ = symmetric_eig(E0)
    n_vals, _ = symmetric_eig(N0)
    return ErrorBound(
        k=k,
        sup_h1=math.sqrt(max(g_vals[-1], 0.0)),
        inf_l2_proj=math.sqrt(max(n_vals[0], 0.0)),
        sup_l2_err_sq=float(e_vals[-1]),
        diag_h1=np.sqrt(np.maximum(np.diag(G), 0.0)),
        gram=G,
    )


def error_bound_rhs(mesh: Mesh, k: int, quad: QuadratureSpec | None = None, M=None) -> float:
    """``sup |(I - Q_h) w|_1`` over unit ``w`` in the span of the first ``k`` eigenfunctions."""
    return error_bound_terms(mesh, k, quad, M).sup_h1


def error_bound_sweep(mesh: Mesh, ks, quad: QuadratureSpec | None = None, M=None, A=None) -> list[ErrorBound]:
    """:func:`error_bound_terms` for every ``k`` in ``ks`` from one set of load vectors.

    The eigenfunctions satisfy ``(grad phi_i, grad v_h) = lambda_i (phi_i, v_h)``
    for every FE function ``v_h`` under either boundary condition, so with
    ``B_i = (phi_i, .)``, ``C = M^-1 B`` and ``S = B^T C`` the Gram matrices are
    ``G = Lambda - (lambda_i + lambda_j) S_ij + C^T A C``, ``E0 = I - S`` and
    ``N0 = S``.  Each ``k`` uses their leading ``k x k`` blocks.
    """
    ks = sorted(int(k) for k in ks)
    if not ks or ks[0] < 1:
        raise InvalidArgumentError(f"k values must be >= 1, got {ks}")
    K = ks[-1]
    spec = continuous_spectrum(mesh.domain, K)
    h = mesh_metrics(mesh).h
    quad = QuadratureSpec.for_frequency(spec.values[-1], h) if quad is None else quad
    quad.require(spec.values[-1], h)
    M = assemble_mass(mesh) if M is None else M
    A = assemble_stiffness(mesh) if A is None else A
    cq = cell_quadrature(mesh, quad)
    nc, nq, d = cq.points.shape
    pts = cq.points.reshape(-1, d)
    B = np.empty((mesh.n_dofs, K))
    C = np.empty_like(B)
    for i, idx in enumerate(spec.indices):
        values = Eigenfunction(mesh.domain, idx)(pts).reshape(nc, nq)
        B[:, i] = _scatter_local(mesh, (values * cq.weights) @ cq.bary)
        C[:, i], _ = cg_solve(M, B[:, i], tol=SOLVE_TOL)
    S = B.T @ C
    S = 0.5 * (S + S.T)
    lam = spec.values
    G = np.diag(lam) - (lam[:, None] + lam[None, :]) * S + C.T @ (A @ C)
    G = 0.5 * (G + G.T)
    E0 = np.eye(K) - S
    out = []
    for k in ks:
        g = np.linalg.eigvalsh(G[:k, :k])
        e = np.linalg.eigvalsh(E0[:k, :k])
        n0 = np.linalg.eigvalsh(S[:k, :k])
        out.append(ErrorBound(
            k=k,
            sup_h1=math.sqrt(max(g[-1], 0.0)),
            inf_l2_proj=math.sqrt(max(n0[0], 0.0)),
            sup_l2_err_sq=float(e[-1]),
            diag_h1=np.sqrt(np.maximum(np.diag(G)[:k], 0.0)),
            gram=G[:k, :k],
        ))
    return out


ERROR_COLUMNS = [
    "k", "lambda_k", "lambda_hk", "lhs", "sup_h1", "C", "rhs", "admissible_bound",
    "inf_l2_proj", "lower_q_bound", "sup_l2_err_sq",
]


def error_estimate_check(domain: DomainSpec, n, ks, c1_hat: float, c2_hat: float,
                         solver="dense", tol=1e-12, seed=0, quad_degree: int = 4,
                         lower_tol: float = 1e-9,
                         quad_subdiv: int | None = None) -> VerificationReport:
    """Check ``0 <= sqrt(lam_hk) - sqrt(lam_k) <= (1 + c1/2) sup |(I - Q_h) w|_1``.

    Rows whose ``lambda_k`` violates ``lambda_k < 1 / (2 c2 h^2)`` are skipped.
    Each passing row also confirms ``||Q_h w||_0 >= (1 - sqrt(2)/2) ||w||_0``
    and ``||(I - Q_h) w||_0^2 <= ||w||_0^2 / 2`` over the same span.
    """
    ks = sorted(int(k) for k in ks)
    mesh = build_mesh(domain, n)
    h = mesh_metrics(mesh).h
    A = assemble_stiffness(mesh)
    M = assemble_mass(mesh)
    kmax = ks[-1]
    if kmax > mesh.n_dofs:
        raise InvalidArgumentError(f"k={kmax} exceeds the {mesh.n_dofs} DOFs")
    eig = smallest_eigenpairs(A, M, kmax, solver=solver, tol=tol, seed=seed)
    spec = continuous_spectrum(domain, kmax)
    C = 1.0 + c1_hat / 2.0
    bound = 1.0 / (2.0 * c2_hat * h**2) if c2_hat > 0 else math.inf
    report = VerificationReport(
        check="error-estimate",
        columns=ERROR_COLUMNS,
        constants={"h": h, "c1_hat": c1_hat, "c2_hat": c2_hat, "C": C,
                   "admissible_bound": bound, "solver": eig.solver.value},
    )
    admissible = [k for k in ks if float(spec.values[k - 1]) < bound]
    terms_of = {}
    if admissible:
        lam_top = float(spec.values[admissible[-1] - 1])
        quad = _quadrature(lam_top, h, quad_degree, quad_subdiv)
        terms_of = {t.k: t for t in error_bound_sweep(mesh, admissible, quad, M, A)}
    for k in ks:
        lam_k = float(spec.values[k - 1])
        lam_hk = float(eig.values[k - 1])
        lhs = math.sqrt(max(lam_hk, 0.0)) - math.sqrt(max(lam_k, 0.0))
        row = dict(k=k, lambda_k=lam_k, lambda_hk=lam_hk, lhs=lhs, C=C,
                   admissible_bound=bound, lower_q_bound=LOWER_Q_FACTOR)
        if k not in terms_of:
            report.add("skipped: lambda_k >= 1/(2 c2 h^2)", **row)
            continue
        terms = terms_of[k]
        rhs = C * terms.sup_h1
        ok = (
            lhs >= -lower_tol
            and lhs <= rhs
            and terms.inf_l2_proj >= LOWER_Q_FACTOR
            and terms.sup_l2_err_sq <= 0.5
        )
        report.add(ok, **row, sup_h1=terms.sup_h1, rhs=rhs,
                   inf_l2_proj=terms.inf_l2_proj, sup_l2_err_sq=terms.sup_l2_err_sq)
    return report
