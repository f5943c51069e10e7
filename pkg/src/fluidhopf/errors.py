"""Exception hierarchy shared across the package."""


class FluidHopfError(Exception):
    """Base class for all package errors."""


class InvalidRates(FluidHopfError):
    """Some fluid rate is zero, or one of the sign classes is empty."""


class InvalidGenerator(FluidHopfError):
    """A generator matrix violates its structural constraints at some time."""


class DimensionMismatch(FluidHopfError):
    """A matrix does not match the state-space dimensions."""


class IntegrationError(FluidHopfError):
    """The evolution solve drifted past its row-sum tolerance."""


class SpectralSplitError(FluidHopfError):
    """The stable/unstable eigenvalue split does not match the sign partition."""


class SubspaceDefect(FluidHopfError):
    """An invariant-subspace basis is numerically singular."""


class NoConvergence(FluidHopfError):
    """Newton refinement failed to reach its residual target."""


class GridError(FluidHopfError):
    """Grid steps are inconsistent with the transport domain."""


class DomainError(FluidHopfError):
    """The grid does not reach the exact-zero cutoff region."""


class DerivativeUnavailable(FluidHopfError):
    """An operation needs d/ds of a boundary function that is not smooth."""


class HazardError(FluidHopfError):
    """A negative holding rate was seen mid-simulation (invalid generator)."""


class IllConditioned(FluidHopfError):
    """Laplace inversion shows oscillation between successive orders."""


class NotConstantFamily(FluidHopfError):
    """An operation requires a constant generator family."""


class ConfigError(FluidHopfError):
    """The run configuration is malformed or incomplete."""
