import numpy as np
import pytest

from fluidhopf import FluidModel, GeneratorFamily, StateSpace


@pytest.fixture(scope="session")
def symmetric_model() -> FluidModel:
    """Two states, rates (+1, -1), unit switch rates both ways."""
    return FluidModel(
        StateSpace(["up", "down"], [1.0, -1.0]),
        GeneratorFamily.constant([[-1.0, 1.0], [1.0, -1.0]]),
    )


@pytest.fixture(scope="session")
def absorbing_model() -> FluidModel:
    """Up state jumps at rate one into an absorbing down state."""
    return FluidModel(
        StateSpace(["up", "down"], [1.0, -1.0]),
        GeneratorFamily.constant([[-1.0, 1.0], [0.0, 0.0]]),
    )


@pytest.fixture(scope="session")
def sinusoidal_model() -> FluidModel:
    """L(s) = (1 + 0.5 sin s) [[-1, 1], [1, -1]] with declared bound 1.5."""
    base = np.array([[-1.0, 1.0], [1.0, -1.0]])
    fam = GeneratorFamily.fourier_polynomial(
        base, fourier_terms=[(0.5 * base, 1.0, 0.0)], bound_K=1.5
    )
    return FluidModel(StateSpace(["up", "down"], [1.0, -1.0]), fam)


@pytest.fixture(scope="session")
def three_state_model() -> FluidModel:
    """Two up states and one down state, asymmetric rates."""
    lam = np.array([
        [-1.5, 1.0, 0.5],
        [0.5, -1.25, 0.75],
        [1.0, 2.0, -3.0],
    ])
    return FluidModel(
        StateSpace(["a", "b", "c"], [1.0, 2.0, -1.0]),
        GeneratorFamily.constant(lam),
    )
