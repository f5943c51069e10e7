"""First-passage functionals of Markov-modulated fluid processes.

Three computation routes cross-validate each other: a matrix Wiener-Hopf
factorization for constant generator matrices, a deterministic semi-
Lagrangian solve of the space-time generator equation for time-varying ones,
and an exact-in-law Monte Carlo simulator.
"""

from ._backend import BACKEND
from .errors import (
    ConfigError,
    DerivativeUnavailable,
    DimensionMismatch,
    DomainError,
    FluidHopfError,
    GridError,
    HazardError,
    IllConditioned,
    IntegrationError,
    InvalidGenerator,
    InvalidRates,
    NoConvergence,
    NotConstantFamily,
    SpectralSplitError,
    SubspaceDefect,
)
from .evolution import EvolutionMatrix, chapman_kolmogorov_residual, evolution_matrix
from .homog import (
    HomogFactorization,
    factorization_residual,
    factorize,
    homog_passage_matrix,
)
from .mc import (
    Estimate,
    PassageSample,
    PathSample,
    estimate_expectation,
    passage_functional,
    replica_rng,
    sample_path,
)
from .model import (
    BlockDecomposition,
    FluidModel,
    GeneratorFamily,
    StateSpace,
    ValidationReport,
    block_decompose,
    ensure_valid,
    eval_generator,
    validate_model,
)
from .passage import (
    BoundaryFunction,
    Grid2D,
    GridFunction,
    SGridTable,
    apply_G,
    check_identity_whd,
    exp_indicator_boundary,
    extract_J,
    extract_P,
    extract_start_passage,
    solve_passage,
    solve_passage_minus,
    table_boundary,
)
from .queries import (
    LaplaceTable,
    homog_crosscheck,
    invert_laplace,
    laplace_inversion_nodes,
    laplace_passage_table,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
