"""Evolution system solves against closed forms and its own flow property."""

import math

import numpy as np
import pytest

from fluidhopf import chapman_kolmogorov_residual, evolution_matrix
from fluidhopf.mc import empirical_marginal


class TestEvolutionMatrix:
    def test_identity_at_equal_times(self, symmetric_model):
        ev = evolution_matrix(symmetric_model, 0.7, 0.7)
        np.testing.assert_array_equal(ev.P, np.eye(2))

    def test_symmetric_closed_form(self, symmetric_model):
        # eigenvalues {0, -2}: P = [[(1+e^-2)/2, (1-e^-2)/2], ...]
        ev = evolution_matrix(symmetric_model, 0.0, 1.0, step=1e-3)
        p = (1.0 + math.exp(-2.0)) / 2.0
        q = (1.0 - math.exp(-2.0)) / 2.0
        np.testing.assert_allclose(ev.P, [[p, q], [q, p]], atol=1e-10)

    def test_absorbing_survival(self, absorbing_model):
        for ell in (0.5, 1.0, 2.0):
            ev = evolution_matrix(absorbing_model, 0.3, 0.3 + ell, step=1e-3)
            assert abs(ev.P[0, 0] - math.exp(-ell)) < 1e-10

    def test_rows_and_range(self, sinusoidal_model):
        ev = evolution_matrix(sinusoidal_model, 0.2, 2.7, step=1e-3)
        np.testing.assert_allclose(ev.P.sum(axis=1), 1.0, atol=1e-10)
        assert np.all(ev.P >= 0.0) and np.all(ev.P <= 1.0)

    def test_bad_window_rejected(self, symmetric_model):
        with pytest.raises(ValueError):
            evolution_matrix(symmetric_model, 2.0, 1.0)


class TestChapmanKolmogorov:
    def test_constant_family_small_residual(self, symmetric_model):
        res = chapman_kolmogorov_residual(symmetric_model, 0.0, 0.4, 1.0, step=1e-3)
        assert res <= 1e-8

    def test_degenerate_split_exact(self, symmetric_model):
        assert chapman_kolmogorov_residual(symmetric_model, 0.5, 0.5, 0.5) == 0.0

    def test_sinusoidal_residual(self, sinusoidal_model):
        res = chapman_kolmogorov_residual(sinusoidal_model, 0.0, 0.5, 1.0, step=1e-3)
        assert res <= 1e-6

    def test_fourth_order_step_halving(self, sinusoidal_model):
        coarse = chapman_kolmogorov_residual(sinusoidal_model, 0.0, 0.5, 1.0, step=4e-2)
        fine = chapman_kolmogorov_residual(sinusoidal_model, 0.0, 0.5, 1.0, step=2e-2)
        assert coarse / fine >= 8.0


@pytest.mark.slow
def test_marginal_matches_simulator(sinusoidal_model):
    """Empirical state law at t matches the evolution matrix row (4 se)."""
    t = 1.5
    ev = evolution_matrix(sinusoidal_model, 0.0, t, step=1e-3)
    p_emp, se = empirical_marginal(sinusoidal_model, 0.0, "up", t, n=100_000, seed=99)
    assert np.all(np.abs(p_emp - ev.P[0]) <= 4.0 * se)
