"""Exact Laplacian spectra of boxes and Weyl-law quantities."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError
from .mesh import BoundaryCondition, DomainSpec

UNIT_BALL_VOLUME = {1: 2.0, 2: math.pi, 3: 4.0 * math.pi / 3.0}

# Over-estimate factor applied to the Weyl-law guess of the K-th eigenvalue.
SEARCH_SLACK = 0.5


@dataclass(frozen=True)
class ContinuousSpectrum:
    """First ``K`` eigenvalues of ``-c * Laplacian`` with their multi-indices."""

    domain: DomainSpec
    values: np.ndarray
    indices: np.ndarray  # (K, d) integers

    @property
    def count(self) -> int:
        return self.values.shape[0]


def _lattice_values(indices: np.ndarray, lengths) -> np.ndarray:
    scaled = indices / np.asarray(lengths)
    return math.pi**2 * (scaled**2).sum(axis=1)


def lattice_points_below(domain: DomainSpec, bound: float) -> np.ndarray:
    """All admissible multi-indices ``m`` with ``pi^2 sum (m_i/L_i)^2 <= bound``."""
    start = 1 if domain.bc is BoundaryCondition.DIRICHLET else 0
    axes = [
        np.arange(start, int(math.floor(L * math.sqrt(max(bound, 0.0)) / math.pi)) + 1)
        for L in domain.lengths
    ]
    if any(a.size == 0 for a in axes):
        return np.empty((0, domain.dim), dtype=np.int64)
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, domain.dim)
    values = _lattice_values(grid, domain.lengths)
    return grid[values <= bound]


def weyl_estimate(domain: DomainSpec, k: float) -> float:
    """Leading Weyl-law value ``w_Omega * k^(2/d)``."""
    return weyl_constant(domain).w_omega * k ** (2.0 / domain.dim)


def continuous_spectrum(domain: DomainSpec, K: int, scale: float = 1.0) -> ContinuousSpectrum:
    """First ``K`` eigenvalues of ``-scale * Laplacian`` on ``domain``.

    Every multi-index below a search bound is enumerated, so the result is
    complete: the bound starts at ``(1 + 0.5)`` times the Weyl estimate of
    the K-th eigenvalue (plus the lowest admissible value) and is doubled
    until at least ``K`` lattice points fall below it.  Ties are ordered
    lexicographically by multi-index.
    """
    if K < 1:
        raise InvalidArgumentError(f"K must be >= 1, got {K}")
    start = 1 if domain.bc is BoundaryCondition.DIRICHLET else 0
    lowest = float(_lattice_values(np.full((1, domain.dim), start), domain.lengths)[0])
    bound = (1.0 + SEARCH_SLACK) * weyl_estimate(domain, K) + lowest
    while True:
        pts = lattice_points_below(domain, bound)
        if pts.shape[0] >= K:
            break
        bound *= 2.0
    values = _lattice_values(pts, domain.lengths)
    keys = [pts[:, j] for j in range(domain.dim - 1, -1, -1)] + [values]
    order = np.lexsort(keys)[:K]
    return ContinuousSpectrum(domain=domain, values=scale * values[order], indices=pts[order])


def counting_function(domain: DomainSpec, lam: float) -> int:
    """Number of eigenvalues ``<= lam``, by direct lattice counting."""
    return int(lattice_points_below(domain, lam).shape[0])


def eigenfunction_eval(domain: DomainSpec, multi_index, points, tol: float = 1e-12):
    """L2-normalized eigenfunction and its gradient at ``points``.

    Dirichlet modes are products of ``sqrt(2/L) sin(m pi x / L)``; Neumann
    modes use cosines with ``1/sqrt(L)`` for ``m = 0``.

    Returns
    -------
    values : ndarray, shape (P,)
    gradients : ndarray, shape (P, d)
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    idx = np.asarray(multi_index, dtype=np.int64).reshape(-1)
    d = domain.dim
    if points.shape[1] != d or idx.shape[0] != d:
        raise InvalidArgumentError("point / multi-index dimension does not match the domain")
    lengths = np.asarray(domain.lengths)
    slack = tol * lengths
    if np.any(points < -slack) or np.any(points > lengths + slack):
        raise InvalidArgumentError("point outside the domain")
    dirichlet = domain.bc is BoundaryCondition.DIRICHLET
    if dirichlet and np.any(idx < 1):
        raise InvalidArgumentError("Dirichlet multi-indices start at 1")
    if np.any(idx < 0):
        raise InvalidArgumentError("multi-indices must be non-negative")

    freq = idx * math.pi / lengths
    arg = points * freq
    norm = np.where(idx == 0, 1.0 / np.sqrt(lengths), np.sqrt(2.0 / lengths))
    if dirichlet:
        f = norm * np.sin(arg)
        df = norm * freq * np.cos(arg)
    else:
        f = norm * np.cos(arg)
        df = -norm * freq * np.sin(arg)
    values = np.prod(f, axis=1)
    grads = np.empty_like(points)
    for j in range(d):
        others = np.prod(np.delete(f, j, axis=1), axis=1) if d > 1 else 1.0
        grads[:, j] = df[:, j] * others
    return values, grads


class Eigenfunction:
    """Callable wrapper of one eigenfunction with ``grad`` and ``eigenvalue``."""

    def __init__(self, domain: DomainSpec, multi_index):
        self.domain = domain
        self.multi_index = tuple(int(i) for i in multi_index)
        self.eigenvalue = float(
            _lattice_values(np.asarray([self.multi_index]), domain.lengths)[0]
        )

    def __call__(self, points):
        return eigenfunction_eval(self.domain, self.multi_index, points, tol=1e-9)[0]

    def grad(self, points):
        return eigenfunction_eval(self.domain, self.multi_index, points, tol=1e-9)[1]

    def __repr__(self):
        return f"Eigenfunction({self.multi_index})"


class EigenfunctionCombination:
    """Finite combination ``sum_j c_j phi_j`` of eigenfunctions."""

    def __init__(self, domain: DomainSpec, indices, coefficients):
        self.terms = [Eigenfunction(domain, i) for i in indices]
        self.coefficients = np.asarray(coefficients, dtype=float)
        self.eigenvalue = max(t.eigenvalue for t in self.terms)

    def __call__(self, points):
        return sum(c * t(points) for c, t in zip(self.coefficients, self.terms))

    def grad(self, points):
        return sum(c * t.grad(points) for c, t in zip(self.coefficients, self.terms))

    @property
    def l2_norm(self) -> float:
        return float(np.linalg.norm(self.coefficients))

    @property
    def h1_seminorm(self) -> float:
        lam = np.array([t.eigenvalue for t in self.terms])
        return float(math.sqrt(np.sum(self.coefficients**2 * lam)))


@dataclass(frozen=True)
class WeylData:
    w_omega: float
    omega_d: float
    volume: float


def weyl_constant(domain: DomainSpec) -> WeylData:
    """``w = (2 pi)^2 / (omega_d Vol)^(2/d)``."""
    d = domain.dim
    omega = UNIT_BALL_VOLUME[d]
    vol = domain.volume
    return WeylData(w_omega=(2.0 * math.pi) ** 2 / (omega * vol) ** (2.0 / d), omega_d=omega, volume=vol)


@dataclass(frozen=True)
class WeylTable:
    """Ratios ``lambda_k / k^(2/d)`` over the non-zero eigenvalues.

    ``gamma0`` and ``gamma1`` are the minimum and maximum ratio inside the
    requested index window.
    """

    k: np.ndarray
    values: np.ndarray
    ratios: np.ndarray
    gamma0: float
    gamma1: float
    window: tuple[int, int]


def weyl_ratio_table(values, d: int, window: tuple[int, int] | None = None,
                     zero_tol: float = 1e-10) -> WeylTable:
    """Ratio table of an ascending spectrum; numerically zero modes are dropped.

    ``k`` is the 1-based position in ``values`` (so a Neumann zero mode at
    ``k = 1`` is skipped and the table starts at ``k = 2``).
    """
    values = np.asarray(values, dtype=float)
    if values.size and np.any(np.diff(values) < -1e-12 * np.abs(values).max()):
        raise InvalidArgumentError("values must be ascending")
    k = np.arange(1, values.size + 1)
    scale = np.abs(values).max() if values.size else 0.0
    keep = values > zero_tol * scale
    k, vals = k[keep], values[keep]
    ratios = vals / k ** (2.0 / d)
    lo, hi = window if window is not None else (int(k[0]) if k.size else 1, int(k[-1]) if k.size else 0)
    sel = (k >= lo) & (k <= hi)
    if not np.any(sel):
        raise InvalidArgumentError(f"window {lo}..{hi} contains no non-zero eigenvalue")
    return WeylTable(
        k=k,
        values=vals,
        ratios=ratios,
        gamma0=float(ratios[sel].min()),
        gamma1=float(ratios[sel].max()),
        window=(lo, hi),
    )
