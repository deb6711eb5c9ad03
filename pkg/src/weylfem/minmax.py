"""Finite-dimensional checks of the Courant-Fischer principle and the
dimension-counting subspace intersection."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError
from .linalg import as_dense_sym, symmetric_eig
from .report import VerificationReport


def modified_gram_schmidt(V: np.ndarray, rtol: float = 1e-10) -> np.ndarray:
    """Orthonormalize the columns of ``V``; raises if they are dependent.

    Row-oriented MGS: each new direction is removed from all later columns
    at once.
    """
    Q = np.array(V, dtype=float, copy=True)
    norms = np.linalg.norm(Q, axis=0)
    scale = norms.max() if norms.size else 1.0
    for j in range(Q.shape[1]):
        nrm = np.linalg.norm(Q[:, j])
        if nrm <= rtol * scale:
            raise InvalidArgumentError(f"column {j} is linearly dependent on the previous ones")
        Q[:, j] /= nrm
        Q[:, j + 1:] -= np.outer(Q[:, j], Q[:, j] @ Q[:, j + 1:])
    return Q


@dataclass(frozen=True)
class SubspaceBasis:
    """Orthonormal basis of a k-dimensional subspace of R^n, stored as columns."""

    vectors: np.ndarray

    def __post_init__(self):
        V = np.asarray(self.vectors, dtype=float)
        if V.ndim != 2 or V.shape[1] > V.shape[0]:
            raise InvalidArgumentError(f"basis must be n x k with k <= n, got {V.shape}")
        gram = V.T @ V
        if not np.allclose(gram, np.eye(V.shape[1]), rtol=0, atol=1e-12):
            V = modified_gram_schmidt(V)
        object.__setattr__(self, "vectors", V)

    @classmethod
    def random(cls, n: int, k: int, rng: np.random.Generator) -> "SubspaceBasis":
        return cls(modified_gram_schmidt(rng.standard_normal((n, k))))

    @property
    def n(self) -> int:
        return self.vectors.shape[0]

    @property
    def k(self) -> int:
        return self.vectors.shape[1]


def subspace_extremal_rayleigh(A, W: SubspaceBasis, which: str = "max") -> float:
    """Max or min of ``(Ax, x)/(x, x)`` over ``x`` in ``W``.

    Equal to the extremal eigenvalue of the compression ``W^T A W``.
    """
    V = W.vectors
    H = V.T @ (np.asarray(A) @ V)
    vals = np.linalg.eigvalsh(0.5 * (H + H.T))
    if which == "max":
        return float(vals[-1])
    if which == "min":
        return float(vals[0])
    raise InvalidArgumentError(f"which must be 'max' or 'min', got {which!r}")


MINMAX_COLUMNS = ["k", "trial", "kind", "lambda_k", "value", "gap", "tol"]


def verify_courant_fischer(A, trials: int = 200, seed: int = 0, ks=None) -> VerificationReport:
    """Test both min-max characterizations on random and optimal subspaces.

    For each ``k`` and trial: the max Rayleigh quotient over a random
    k-dimensional subspace is at least ``lambda_k`` and the min over a random
    ``(n-k+1)``-dimensional subspace is at most ``lambda_k``.  The spans of
    the first ``k`` and of the last ``n-k+1`` eigenvectors attain equality.
    Trial ``i`` draws its subspaces from a generator seeded with
    ``seed + i``.  The tolerance is ``1e-9`` times the spectral range.
    """
    A = as_dense_sym(A)
    n = A.shape[0]
    lam, vecs = symmetric_eig(A)
    spread = float(lam[-1] - lam[0])
    tol = 1e-9 * (spread if spread > 0 else max(abs(lam[-1]), 1.0))
    ks = list(range(1, n + 1)) if ks is None else [int(k) for k in ks]
    if any(not 1 <= k <= n for k in ks):
        raise InvalidArgumentError(f"k values must lie in [1, {n}]")

    report = VerificationReport(
        check="minmax",
        columns=MINMAX_COLUMNS,
        constants={"n": n, "trials": trials, "seed": seed, "tol": tol,
                   "lambda_min": float(lam[0]), "lambda_max": float(lam[-1])},
    )
    for k in ks:
        lk = float(lam[k - 1])
        top = subspace_extremal_rayleigh(A, SubspaceBasis(vecs[:, :k]), "max")
        report.add(abs(top - lk) <= tol, k=k, trial=-1, kind="minmax-optimal",
                   lambda_k=lk, value=top, gap=top - lk, tol=tol)
        bottom = subspace_extremal_rayleigh(A, SubspaceBasis(vecs[:, k - 1:]), "min")
        report.add(abs(bottom - lk) <= tol, k=k, trial=-1, kind="maxmin-optimal",
                   lambda_k=lk, value=bottom, gap=bottom - lk, tol=tol)
        for i in range(trials):
            rng = np.random.default_rng(seed + i)
            W = SubspaceBasis.random(n, k, rng)
            value = subspace_extremal_rayleigh(A, W, "max")
            report.add(value >= lk - tol, k=k, trial=i, kind="minmax",
                       lambda_k=lk, value=value, gap=value - lk, tol=tol)
            U = SubspaceBasis.random(n, n - k + 1, rng)
            value = subspace_extremal_rayleigh(A, U, "min")
            report.add(value <= lk + tol, k=k, trial=i, kind="maxmin",
                       lambda_k=lk, value=value, gap=lk - value, tol=tol)
    return report


@dataclass(frozen=True)
class Witness:
    """Unit vector in ``W`` and in ``span{e_k, ..., e_n}`` with its distances to both."""

    vector: np.ndarray
    dist_to_w: float
    dist_to_tail: float
    constructive: np.ndarray | None

    @property
    def residual(self) -> float:
        return max(self.dist_to_w, self.dist_to_tail)


def intersection_witness(n: int, k: int, W: SubspaceBasis, seed: int = 0,
                         tol: float = 1e-8) -> Witness:
    """Nonzero vector of ``W`` whose first ``k - 1`` coordinates vanish.

    Such a vector exists because ``dim W + dim span{e_k..e_n} = n + 1``.
    It is the smallest right singular direction of the leading
    ``(k-1) x k`` block of the basis.  When the leading ``k x k`` block ``C``
    is well conditioned the constructive solution of ``C y = e_k`` is also
    returned, mapped back into ``W`` and normalized.
    """
    V = W.vectors
    if V.shape != (n, k) or not 1 <= k <= n:
        raise InvalidArgumentError(f"need an {n} x {k} basis with 1 <= k <= n, got {V.shape}")
    head = V[: k - 1, :]
    if k == 1:
        y = np.zeros(1)
        y[0] = 1.0
    else:
        _, _, vt = np.linalg.svd(head)
        y = vt[-1]
    psi = V @ y
    psi /= np.linalg.norm(psi)
    if psi[np.argmax(np.abs(psi))] < 0:
        psi = -psi

    constructive = None
    C = V[:k, :]
    if np.linalg.cond(C) < 1e8:
        e_k = np.zeros(k)
        e_k[-1] = 1.0
        z = V @ np.linalg.solve(C, e_k)
        constructive = z / np.linalg.norm(z)

    dist_w = float(np.linalg.norm(psi - V @ (V.T @ psi)))
    dist_tail = float(np.linalg.norm(psi[: k - 1]))
    witness = Witness(psi, dist_w, dist_tail, constructive)
    if witness.residual > tol:
        raise ArithmeticError(f"witness residual {witness.residual:.3e} exceeds {tol:g}")
    return witness


WITNESS_COLUMNS = ["instance", "n", "k", "dist_to_w", "dist_to_tail", "residual", "tol"]


def verify_intersection(n: int = 40, k: int = 7, instances: int = 100, seed: int = 0,
                        tol: float = 1e-8) -> VerificationReport:
    """Witness search on ``instances`` random k-dimensional subspaces of R^n."""
    report = VerificationReport(check="intersection", columns=WITNESS_COLUMNS,
                                constants={"n": n, "k": k, "instances": instances, "seed": seed})
    for i in range(instances):
        rng = np.random.default_rng(seed + i)
        W = SubspaceBasis.random(n, k, rng)
        try:
            w = intersection_witness(n, k, W, tol=tol)
            dw, dt = w.dist_to_w, w.dist_to_tail
        except ArithmeticError:
            dw = dt = float("inf")
        res = max(dw, dt)
        report.add(res <= tol, instance=i, n=n, k=k, dist_to_w=dw, dist_to_tail=dt,
                   residual=res, tol=tol)
    return report
