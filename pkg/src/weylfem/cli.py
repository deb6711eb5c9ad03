"""Command-line driver for the verification experiments.

Every command writes one report (CSV by default, JSON on request) and
exits with 0 when every row passes or is skipped, 1 when a row fails and
2 on a usage or configuration error.
"""

from __future__ import annotations

import argparse
import dataclasses
import math
import sys
from dataclasses import dataclass
from typing import Any, Callable, Sequence

import numpy as np

from . import __version__
from .assembly import CoefficientField, assemble_mass, assemble_stiffness, write_coo
from .eigensolver import relative_residuals, smallest_eigenpairs
from .errors import InvalidArgumentError, ResolutionError, WeylFemError
from .linalg import dense_generalized_eig
from .mesh import BoundaryCondition, DomainKind, DomainSpec, build_mesh, mesh_metrics, write_mesh
from .minmax import intersection_witness, SubspaceBasis, verify_courant_fischer
from .projection import Projector, error_estimate_check, estimate_constants
from .report import VerificationReport
from .spectra import continuous_spectrum, weyl_constant, weyl_ratio_table

PROG = "weylfem"

COMMANDS = (
    "mesh-info", "eigs", "bound-check", "weyl-check", "inverse-check",
    "minmax-test", "error-estimate", "constants",
)
# Commands whose --n lists refinement levels instead of per-axis counts.
FAMILY_COMMANDS = ("bound-check", "inverse-check", "constants")

LOWER_BOUND_TOL = 1e-8
ZERO_MODE_TOL = 1e-10
WITNESS_TOL = 1e-8

DEFAULT_N = {"interval": (32,), "square": (16,), "rect": (16,), "box": (4,)}


class UsageError(InvalidArgumentError):
    """Invalid flag, config key or value; maps to exit status 2."""


# ------------------------------------------------------------------ parsing


def _positive_float(text: str) -> float:
    value = float(text)
    if not math.isfinite(value) or value <= 0:
        raise ValueError(f"expected a positive number, got {text!r}")
    return value


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise ValueError(f"expected a positive integer, got {text!r}")
    return value


def _int(text: str) -> int:
    return int(text)


def _float_list(text: str) -> tuple[float, ...]:
    return tuple(_positive_float(t) for t in text.split(",") if t.strip())


def _int_list(text: str) -> tuple[int, ...]:
    return tuple(_positive_int(t) for t in text.split(",") if t.strip())


def parse_k(text: str) -> tuple[int, ...]:
    """``"a..b"``, ``"b"`` (meaning ``1..b``) or a comma list, sorted and unique."""
    text = text.strip()
    if ".." in text:
        lo, hi = (_positive_int(t) for t in text.split("..", 1))
        if hi < lo:
            raise ValueError(f"empty k range {text!r}")
        values = range(lo, hi + 1)
    elif "," in text:
        values = _int_list(text)
    else:
        values = range(1, _positive_int(text) + 1)
    return tuple(sorted(set(values)))


def _choice(*options: str) -> Callable[[str], str]:
    def convert(text: str) -> str:
        text = text.strip().lower()
        if text not in options:
            raise ValueError(f"expected one of {', '.join(options)}, got {text!r}")
        return text

    return convert


def _path(text: str) -> str:
    return text.strip()


# key -> (converter, default, help)
OPTIONS: dict[str, tuple[Callable[[str], Any], Any, str]] = {
    "domain": (_choice("interval", "square", "rect", "box"), "interval", "domain kind"),
    "lengths": (_float_list, None, "side lengths a[,b[,c]] (default: unit)"),
    "n": (_int_list, None, "subdivisions n[,n[,n]]; refinement levels for family commands"),
    "bc": (_choice("dirichlet", "neumann"), "dirichlet", "boundary condition"),
    "k": (parse_k, None, "eigenvalue indices: a..b, b (=1..b) or a comma list"),
    "solver": (_choice("dense", "lobpcg"), "dense", "eigensolver"),
    "tol": (_positive_float, 1e-10, "eigensolver residual tolerance"),
    "seed": (_int, 0, "random seed"),
    "quad_degree": (_positive_int, 4, "base quadrature degree"),
    "quad_subdiv": (_positive_int, None, "fixed quadrature subdivisions (default: automatic)"),
    "alpha_scalar": (_positive_float, 1.0, "constant coefficient alpha = c I"),
    "out": (_path, None, "output file (default: stdout)"),
    "format": (_choice("csv", "json"), "csv", "report format"),
    "trials": (_positive_int, 200, "minmax-test: random subspaces per k"),
    "instances": (_positive_int, 100, "minmax-test: intersection witness instances"),
    "witness_k": (_positive_int, 7, "minmax-test: subspace dimension of the witness search"),
    "projector": (_choice("qh", "ph"), "qh", "constants: L2 (qh) or elliptic (ph) projection"),
    "delta": (_positive_float, 0.1, "weyl-check: allowed excess of gamma0 over w_Omega"),
    "drift_tol": (_positive_float, 0.2, "constants: allowed relative spread across meshes"),
    "c1": (_positive_float, None, "error-estimate: stability constant (default: measured)"),
    "c2": (_positive_float, None, "error-estimate: approximation constant (default: measured)"),
    "dump_mesh": (_path, None, "mesh-info: write vertices/cells/boundary to this file"),
    "dump_stiffness": (_path, None, "eigs: write the stiffness matrix as row col value lines"),
    "dump_mass": (_path, None, "eigs: write the mass matrix as row col value lines"),
}

COLUMNS = {
    "mesh-info": ["n", "n_vertices", "n_cells", "n_dofs", "h", "min_inner_diameter",
                  "quasi_uniformity", "volume_sum", "domain_volume"],
    "eigs": ["k", "lambda_hk", "lambda_k", "ratio", "residual", "tol"],
    "bound-check": ["n", "h", "k", "lambda_k", "lambda_hk", "ratio", "closed_form",
                    "closed_form_err", "closed_form_tol"],
    "weyl-check": ["kind", "k", "value", "ratio", "w_omega", "gamma0", "gamma1", "delta"],
    "inverse-check": ["kind", "n", "h", "N", "lambda_hN", "product", "spread"],
    "minmax-test": ["kind", "k", "trial", "lambda_k", "value", "gap", "tol"],
    "error-estimate": None,  # filled from the projection module
    "constants": ["kind", "n", "h", "samples", "c1", "c2", "c1_squared_form", "drift",
                  "drift_tol"],
}

HELP = {
    "mesh-info": "Build a mesh and report sizes and shape-regularity.\n"
    "Row passes when all cells are non-degenerate and their volumes sum to the domain volume.",
    "eigs": "Smallest discrete eigenvalues with relative residuals\n"
    "||A x - lambda M x|| / ((||A|| + |lambda| ||M||) ||x||), norms as max row sums.\n"
    "Row passes when the relative residual is at most --tol.",
    "bound-check": "Compare lambda_hk with the continuous lambda_k on a mesh family.\n"
    "Row passes when ratio >= 1 - 1e-8 and, for uniform Dirichlet intervals, lambda_hk\n"
    "matches the closed form to closed_form_tol.  Neumann k=1 passes when\n"
    "lambda_h1 <= 1e-10 lambda_h2.  Measured C_w per mesh and its drift are in the header.",
    "weyl-check": "Ratio tables lambda/k^(2/d) for continuous and discrete spectra.\n"
    "kind=continuous|discrete rows pass for positive finite ratios; *-window rows pass\n"
    "when 0 < gamma0 <= gamma1 < inf and gamma0 <= w_omega (1 + delta).",
    "inverse-check": "Largest discrete eigenvalue times h^2 over a mesh family.\n"
    "kind=family row passes when the spread max/min of the product is below 2.",
    "minmax-test": "Courant-Fischer checks on a random symmetric n x n matrix\n"
    "(--n is the order) plus the subspace intersection witness.\n"
    "minmax rows pass when value >= lambda_k - tol, maxmin rows when value <= lambda_k + tol,\n"
    "*-optimal rows when |gap| <= tol, intersection rows when value (residual) <= tol.",
    "error-estimate": "Eigenvalue error bound with the L2 projection.\n"
    "Row passes when -1e-9 <= lhs <= rhs, inf_l2_proj >= lower_q_bound and\n"
    "sup_l2_err_sq <= 1/2.  Rows with lambda_k >= admissible_bound are skipped.\n"
    "Without --c1/--c2 the constants are measured on levels n/4, n/2, n.",
    "constants": "Projection constants c1, c2 measured on a mesh family.\n"
    "kind=mesh rows pass (for ph: c1 <= 1 + 1e-6); kind=drift rows pass when\n"
    "max/min - 1 across meshes is at most drift_tol.",
}


@dataclass(frozen=True)
class RunConfig:
    """Validated settings of one command."""

    command: str
    domain: DomainSpec
    domain_name: str
    n: tuple[int, ...]
    k: tuple[int, ...] | None
    solver: str
    tol: float
    seed: int
    quad_degree: int
    quad_subdiv: int | None
    alpha_scalar: float
    out: str | None
    format: str
    trials: int
    instances: int
    witness_k: int
    projector: str
    delta: float
    drift_tol: float
    c1: float | None
    c2: float | None
    dump_mesh: str | None
    dump_stiffness: str | None
    dump_mass: str | None

    @property
    def family(self) -> list[int]:
        return list(self.n)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.n if len(self.n) > 1 else self.n * self.domain.dim

    @property
    def alpha(self) -> CoefficientField | None:
        if self.alpha_scalar == 1.0:
            return None
        return CoefficientField.scalar(self.alpha_scalar, self.domain.dim)

    def echo(self) -> str:
        parts = []
        for f in dataclasses.fields(self):
            if f.name in ("command", "domain"):
                continue
            value = getattr(self, f.name)
            if value is None:
                continue
            if isinstance(value, tuple):
                value = ",".join(str(v) for v in value)
            parts.append(f"{f.name}={value}")
        return " ".join(parts)


def read_config_file(path: str) -> dict[str, Any]:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    values: dict[str, Any] = {}
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise UsageError(f"cannot read config file {path}: {exc.strerror}") from None
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected 'key = value'")
        key, text = (t.strip() for t in line.split("=", 1))
        name = key.replace("-", "_")
        if name not in OPTIONS or name == "config":
            raise UsageError(f"{path}:{lineno}: unknown key {key!r}")
        try:
            values[name] = OPTIONS[name][0](text)
        except ValueError as exc:
            raise UsageError(f"{path}:{lineno}: bad value for {key!r}: {exc}") from None
    return values


def _argparse_type(name: str, convert: Callable[[str], Any]):
    def wrapped(text: str):
        try:
            return convert(text)
        except ValueError as exc:
            raise argparse.ArgumentTypeError(str(exc)) from None

    wrapped.__name__ = name
    return wrapped


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    for name, (convert, default, text) in OPTIONS.items():
        if default is not None:
            text = f"{text} (default: {default})"
        common.add_argument(
            "--" + name.replace("_", "-"),
            dest=name,
            type=_argparse_type(name, convert),
            default=argparse.SUPPRESS,
            help=text,
        )
    common.add_argument("--config", default=argparse.SUPPRESS,
                        help="file of 'key = value' lines; flags take precedence")
    parser = argparse.ArgumentParser(
        prog=PROG,
        description="Finite element spectra of the Laplacian and the checks built on them.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    for command in COMMANDS:
        columns = COLUMNS[command] or _error_columns()
        sub.add_parser(
            command,
            parents=[common],
            help=HELP[command].split("\n", 1)[0],
            description=HELP[command],
            epilog="CSV columns: " + ", ".join(columns + ["status"]),
            formatter_class=argparse.RawDescriptionHelpFormatter,
        )
    return parser


def _error_columns() -> list[str]:
    from .projection import ERROR_COLUMNS

    return list(ERROR_COLUMNS)


def _domain(name: str, lengths, bc: str) -> DomainSpec:
    dims = {"interval": 1, "square": 2, "rect": 2, "box": 3}
    d = dims[name]
    if lengths is None:
        if name == "rect":
            raise UsageError("--domain rect needs --lengths a,b")
        lengths = (1.0,) * d
    if name == "square" and len(lengths) == 1:
        lengths = lengths * 2
    if len(lengths) != d:
        raise UsageError(f"--lengths for {name} needs {d} values, got {len(lengths)}")
    if name == "square" and lengths[0] != lengths[1]:
        raise UsageError("--domain square needs equal lengths; use rect")
    kind = {1: DomainKind.INTERVAL, 2: DomainKind.RECTANGLE, 3: DomainKind.BOX}[d]
    return DomainSpec(kind, tuple(lengths), BoundaryCondition(bc))


def parse_config(argv: Sequence[str] | None = None) -> RunConfig:
    """Merge defaults, the optional config file and flags, then validate.

    Raises :class:`UsageError` for semantic problems; argparse itself exits
    with status 2 on malformed flags.
    """
    ns = vars(build_parser().parse_args(argv))
    command = ns.pop("command")
    values = {name: default for name, (_, default, _) in OPTIONS.items()}
    if "config" in ns:
        values.update(read_config_file(ns.pop("config")))
    values.update(ns)

    if command == "minmax-test":
        domain = DomainSpec.unit(1)
        n = values["n"] or (50,)
        if len(n) != 1:
            raise UsageError("minmax-test takes a single matrix order --n")
        if values["witness_k"] > n[0]:
            raise UsageError(f"--witness-k {values['witness_k']} exceeds --n {n[0]}")
    else:
        domain = _domain(values["domain"], values["lengths"], values["bc"])
        n = values["n"] or DEFAULT_N[values["domain"]]
        if command not in FAMILY_COMMANDS and len(n) not in (1, domain.dim):
            raise UsageError(f"--n needs 1 or {domain.dim} values for {command}, got {len(n)}")
    if values["k"] is not None and command == "minmax-test" and values["k"][-1] > n[0]:
        raise UsageError(f"--k {values['k'][-1]} exceeds the matrix order {n[0]}")
    if command in ("error-estimate", "constants") and values["alpha_scalar"] != 1.0:
        raise UsageError(f"{command} supports only the Laplacian (--alpha-scalar 1)")
    if command == "error-estimate" and (values["c1"] is None) != (values["c2"] is None):
        raise UsageError("--c1 and --c2 must be given together")

    return RunConfig(command=command, domain=domain, domain_name=values["domain"], n=n,
                     **{k: v for k, v in values.items() if k not in ("domain", "n", "lengths", "bc")})


# ------------------------------------------------------------------ commands


def _report(config: RunConfig, check: str) -> VerificationReport:
    return VerificationReport(
        check=check,
        columns=list(COLUMNS[check] or _error_columns()),
        provenance={"version": __version__, "command": check,
                    "domain": config.domain.kind.value, "lengths": config.domain.lengths,
                    "bc": config.domain.bc.value, "seed": config.seed, "config": config.echo()},
    )


def _problem(config: RunConfig, n):
    mesh = build_mesh(config.domain, n)
    return mesh, assemble_stiffness(mesh, config.alpha), assemble_mass(mesh)


def _indices(config: RunConfig, default_max: int, n_dofs: int) -> list[int]:
    ks = list(config.k) if config.k is not None else list(range(1, min(default_max, n_dofs) + 1))
    if ks[-1] > n_dofs:
        raise UsageError(f"k={ks[-1]} exceeds the {n_dofs} degrees of freedom")
    return ks


def _solve(config: RunConfig, A, M, kmax: int):
    return smallest_eigenpairs(A, M, kmax, solver=config.solver, tol=config.tol, seed=config.seed)


def closed_form_interval(n: int, length: float, k) -> np.ndarray:
    """Discrete Dirichlet eigenvalues ``(6/h^2)(1 - cos t)/(2 + cos t)``, ``t = k pi / n``."""
    h = length / n
    theta = np.asarray(k, dtype=float) * math.pi / n
    return 6.0 / h**2 * (1.0 - np.cos(theta)) / (2.0 + np.cos(theta))


def _open_dump(path: str):
    try:
        return open(path, "w", encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot write {path}: {exc.strerror}") from None


def run_mesh_info(config: RunConfig) -> VerificationReport:
    report = _report(config, "mesh-info")
    mesh = build_mesh(config.domain, config.shape)
    metrics = mesh_metrics(mesh)
    total = float(metrics.volume.sum())
    ok = abs(total - config.domain.volume) <= 1e-12 * config.domain.volume
    report.add(ok, n="x".join(str(s) for s in mesh.shape), n_vertices=mesh.n_vertices,
               n_cells=mesh.n_cells, n_dofs=mesh.n_dofs, h=metrics.h,
               min_inner_diameter=float(metrics.inner_diameter.min()),
               quasi_uniformity=metrics.quasi_uniformity, volume_sum=total,
               domain_volume=config.domain.volume)
    if config.dump_mesh:
        with _open_dump(config.dump_mesh) as fh:
            write_mesh(mesh, fh)
    return report


def run_eigs(config: RunConfig) -> VerificationReport:
    report = _report(config, "eigs")
    mesh, A, M = _problem(config, config.shape)
    ks = _indices(config, 10, mesh.n_dofs)
    eig = _solve(config, A, M, ks[-1])
    cont = continuous_spectrum(config.domain, ks[-1], scale=config.alpha_scalar)
    report.constants.update(n_dofs=mesh.n_dofs, solver=eig.solver.value, iterations=eig.iterations)
    rel, _ = relative_residuals(A, M, eig.values, eig.vectors)
    for k in ks:
        lam_h, lam = float(eig.values[k - 1]), float(cont.values[k - 1])
        res = float(rel[k - 1])
        report.add(res <= config.tol, k=k, lambda_hk=lam_h, lambda_k=lam,
                   ratio=lam_h / lam if lam > 0 else "", residual=res, tol=config.tol)
    for path, matrix in ((config.dump_stiffness, A), (config.dump_mass, M)):
        if path:
            with _open_dump(path) as fh:
                write_coo(matrix, fh)
    return report


def _relative_spread(values) -> float:
    values = np.asarray(list(values), dtype=float)
    return float(values.max() / values.min() - 1.0) if values.size else 0.0


def run_bound_check(config: RunConfig) -> VerificationReport:
    """``lambda_k <= lambda_hk <= C_w lambda_k`` over the refinement family."""
    report = _report(config, "bound-check")
    neumann = config.domain.bc is BoundaryCondition.NEUMANN
    closed = config.domain.dim == 1 and not neumann
    cf_tol = 1e-10 if config.solver == "dense" else 1e-8
    cw: dict[int, float] = {}
    for n in config.family:
        mesh, A, M = _problem(config, n)
        h = mesh_metrics(mesh).h
        ks = _indices(config, 20, mesh.n_dofs)
        kmax = max(ks[-1], 2) if neumann else ks[-1]
        eig = _solve(config, A, M, min(kmax, mesh.n_dofs))
        cont = continuous_spectrum(config.domain, kmax, scale=config.alpha_scalar)
        ratios = []
        for k in ks:
            lam_h, lam = float(eig.values[k - 1]), float(cont.values[k - 1])
            row = dict(n=n, h=h, k=k, lambda_k=lam, lambda_hk=lam_h, closed_form_tol=cf_tol)
            if lam == 0.0:
                ok = abs(lam_h) <= ZERO_MODE_TOL * float(eig.values[1])
                report.add(ok, **row)
                continue
            ratio = lam_h / lam
            ratios.append(ratio)
            ok = ratio >= 1.0 - LOWER_BOUND_TOL
            if closed:
                exact = float(closed_form_interval(n, config.domain.lengths[0], k)) * config.alpha_scalar
                err = abs(lam_h - exact) / exact
                row.update(closed_form=exact, closed_form_err=err)
                ok = ok and err <= cf_tol
            report.add(ok, **row, ratio=ratio)
        if ratios:
            cw[n] = max(ratios)
            report.constants[f"C_w[n={n}]"] = cw[n]
    if cw:
        values = list(cw.values())
        drift = max((abs(b / a - 1.0) for a, b in zip(values, values[1:])), default=0.0)
        report.constants.update(C_w=max(values), C_w_drift=drift)
    return report


def run_weyl_check(config: RunConfig) -> VerificationReport:
    """Continuous and discrete ``lambda / k^(2/d)`` tables and their windows."""
    report = _report(config, "weyl-check")
    d = config.domain.dim
    w = weyl_constant(config.domain).w_omega * config.alpha_scalar
    mesh, A, M = _problem(config, config.shape)
    ks = list(config.k) if config.k is not None else list(range(1, mesh.n_dofs + 1))
    cont = continuous_spectrum(config.domain, ks[-1], scale=config.alpha_scalar)
    disc_ks = [k for k in ks if k <= mesh.n_dofs]
    report.constants.update(w_omega=w, delta=config.delta, n_dofs=mesh.n_dofs)

    def emit(kind: str, values: np.ndarray, selected: list[int]):
        if not selected:
            return
        table = weyl_ratio_table(values[: selected[-1]], d, window=(selected[0], selected[-1]))
        ratio_of = dict(zip(table.k.tolist(), table.ratios.tolist()))
        for k in selected:
            value = float(values[k - 1])
            if k not in ratio_of:
                scale = float(np.abs(values[: selected[-1]]).max())
                report.add(abs(value) <= ZERO_MODE_TOL * scale, kind=f"{kind}-zero-mode",
                           k=k, value=value)
                continue
            r = ratio_of[k]
            report.add(math.isfinite(r) and r > 0, kind=kind, k=k, value=value, ratio=r)
        ok = 0 < table.gamma0 <= table.gamma1 < math.inf and table.gamma0 <= w * (1 + config.delta)
        report.add(ok, kind=f"{kind}-window", k=f"{table.window[0]}..{table.window[1]}",
                   w_omega=w, gamma0=table.gamma0, gamma1=table.gamma1, delta=config.delta)
        report.constants.update({f"{kind}_gamma0": table.gamma0, f"{kind}_gamma1": table.gamma1})

    emit("continuous", cont.values, ks)
    if disc_ks:
        eig = _solve(config, A, M, max(disc_ks[-1], min(2, mesh.n_dofs)))
        emit("discrete", eig.values, disc_ks)
    return report


def run_inverse_inequality_check(config: RunConfig) -> VerificationReport:
    """``lambda_hN h^2`` over the family; always uses the dense solver."""
    report = _report(config, "inverse-check")
    products = []
    for n in config.family:
        mesh, A, M = _problem(config, n)
        h = mesh_metrics(mesh).h
        lam_max = float(dense_generalized_eig(A, M).values[-1])
        product = lam_max * h**2
        products.append(product)
        report.add(math.isfinite(product) and product > 0, kind="mesh", n=n, h=h,
                   N=mesh.n_dofs, lambda_hN=lam_max, product=product)
    spread = max(products) / min(products)
    report.add(spread < 2.0, kind="family", spread=spread)
    report.constants.update(product_min=min(products), product_max=max(products), spread=spread)
    return report


def random_symmetric(n: int, seed: int) -> np.ndarray:
    """Symmetric Gaussian matrix from a generator seeded with ``(seed, n)``."""
    B = np.random.default_rng([seed, n]).standard_normal((n, n))
    return 0.5 * (B + B.T)


def run_minmax_check(config: RunConfig) -> VerificationReport:
    n = config.n[0]
    A = random_symmetric(n, config.seed)
    cf = verify_courant_fischer(A, trials=config.trials, seed=config.seed, ks=config.k)
    report = _report(config, "minmax-test")
    report.constants.update(cf.constants)
    for row in cf.rows:
        report.add(row["status"], **{c: row[c] for c in cf.columns})
    k = config.witness_k
    for i in range(config.instances):
        W = SubspaceBasis.random(n, k, np.random.default_rng(config.seed + i))
        try:
            res = intersection_witness(n, k, W, tol=WITNESS_TOL).residual
        except ArithmeticError:
            res = math.inf
        report.add(res <= WITNESS_TOL, kind="intersection", k=k, trial=i, value=res,
                   tol=WITNESS_TOL)
    report.constants.update(witness_k=k, instances=config.instances)
    return report


def _coarser(shape: tuple[int, ...]) -> list:
    levels = []
    for f in (4, 2):
        if all(s % f == 0 and s // f >= 2 for s in shape):
            levels.append(tuple(s // f for s in shape))
    return levels + [shape]


def run_error_estimate(config: RunConfig) -> VerificationReport:
    shape = config.shape
    mesh = build_mesh(config.domain, shape)
    ks = _indices(config, 5, mesh.n_dofs)
    if config.c1 is not None:
        c1, c2, source = config.c1, config.c2, "given"
    else:
        est = estimate_constants(config.domain, _coarser(shape), projector="qh",
                                 quad_degree=config.quad_degree, seed=config.seed,
                                 quad_subdiv=config.quad_subdiv)
        c1, c2, source = est.c1, est.c2, "measured"
    report = error_estimate_check(config.domain, shape, ks, c1, c2, solver=config.solver,
                                  tol=config.tol, seed=config.seed,
                                  quad_degree=config.quad_degree,
                                  quad_subdiv=config.quad_subdiv)
    report.provenance = _report(config, "error-estimate").provenance
    report.constants["constants_source"] = source
    return report


def run_constants(config: RunConfig) -> VerificationReport:
    report = _report(config, "constants")
    est = estimate_constants(config.domain, config.family, projector=config.projector,
                             quad_degree=config.quad_degree, seed=config.seed,
                             quad_subdiv=config.quad_subdiv)
    elliptic = est.projector is Projector.ELLIPTIC
    per = {key: est.per_mesh(key) for key in ("c1", "c2", "c1_squared_form")}
    for n in config.family:
        rows = [r for r in est.rows if r["n"] == n]
        c1 = per["c1"][n]
        report.add(c1 <= 1.0 + 1e-6 if elliptic else math.isfinite(c1), kind="mesh", n=n,
                   h=rows[0]["h"], samples=len(rows), c1=c1, c2=per["c2"][n],
                   c1_squared_form=per["c1_squared_form"][n])
    for key in ("c1", "c2"):
        spread = _relative_spread(per[key].values())
        report.add(spread <= config.drift_tol, kind=f"drift-{key}", drift=spread,
                   drift_tol=config.drift_tol)
    report.constants.update(projector=est.projector.value, c1_hat=est.c1, c2_hat=est.c2,
                            c1_squared_form=est.c1_squared_form)
    return report


RUNNERS: dict[str, Callable[[RunConfig], VerificationReport]] = {
    "mesh-info": run_mesh_info,
    "eigs": run_eigs,
    "bound-check": run_bound_check,
    "weyl-check": run_weyl_check,
    "inverse-check": run_inverse_inequality_check,
    "minmax-test": run_minmax_check,
    "error-estimate": run_error_estimate,
    "constants": run_constants,
}


def render(report: VerificationReport, fmt: str) -> str:
    import io

    buf = io.StringIO()
    if fmt == "json":
        report.write_json(buf)
    else:
        report.write_csv(buf)
    return buf.getvalue()


def main(argv: Sequence[str] | None = None) -> int:
    try:
        config = parse_config(argv)
        report = RUNNERS[config.command](config)
    except (UsageError, ResolutionError, InvalidArgumentError) as exc:
        print(f"{PROG}: error: {exc}", file=sys.stderr)
        return 2
    except WeylFemError as exc:
        print(f"{PROG}: {exc.__class__.__name__}: {exc}", file=sys.stderr)
        return 1
    text = render(report, config.format)
    if config.out:
        try:
            with open(config.out, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        except OSError as exc:
            print(f"{PROG}: error: cannot write {config.out}: {exc.strerror}", file=sys.stderr)
            return 2
    else:
        sys.stdout.write(text)
    print(report.summary(), file=sys.stderr)
    return 0 if report.passed else 1


if __name__ == "__main__":
    sys.exit(main())
