"""P1 finite element spectra of second-order elliptic operators on boxes.

Structured simplicial meshes, stiffness and mass assembly, dense and
LOBPCG eigensolvers, exact continuous spectra, projection constants and
finite-dimensional min-max checks.
"""

__version__ = "0.1.0"

from .assembly import (
    CoefficientField,
    assemble_energy_load,
    assemble_load,
    assemble_mass,
    assemble_stiffness,
    solve_source,
)
from .eigensolver import (
    EigenResult,
    SolverKind,
    lobpcg_smallest,
    rayleigh_quotient,
    residual_check,
    smallest_eigenpairs,
)
from .errors import (
    CoefficientError,
    ConsistencyError,
    DimensionError,
    FactorizationError,
    InvalidArgumentError,
    InvalidMeshError,
    IterationLimitError,
    ResolutionError,
    WeylFemError,
)
from .linalg import cg_solve, dense_generalized_eig, symmetric_eig
from .mesh import BoundaryCondition, DomainKind, DomainSpec, Mesh, build_mesh, mesh_metrics
from .minmax import (
    SubspaceBasis,
    intersection_witness,
    subspace_extremal_rayleigh,
    verify_courant_fischer,
)
from .projection import (
    Projector,
    elliptic_project,
    error_bound_rhs,
    error_estimate_check,
    estimate_constants,
    l2_project,
)
from .quadrature import QuadratureSpec
from .report import VerificationReport
from .spectra import (
    continuous_spectrum,
    counting_function,
    weyl_constant,
    weyl_ratio_table,
)
