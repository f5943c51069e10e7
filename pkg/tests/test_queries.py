"""Laplace tables, the homogeneous crosscheck, and Gaver-Stehfest inversion."""

import math

import numpy as np
import pytest

from fluidhopf import (
    IllConditioned,
    NotConstantFamily,
    factorize,
    homog_crosscheck,
    homog_passage_matrix,
    invert_laplace,
    laplace_inversion_nodes,
    laplace_passage_table,
)


class TestLaplaceTable:
    def test_constant_model_matches_factorization(self, symmetric_model):
        c, level = 1.0, 1.0
        ds = 2e-3
        table = laplace_passage_table(symmetric_model, c, level, ds=ds, da=ds,
                                      eta=10.0, s_window=1.0)
        fact = factorize(symmetric_model.generator.matrix, symmetric_model.space, c)
        up_block = homog_passage_matrix(fact, level, "plus", "plus")
        down_block = homog_passage_matrix(fact, level, "plus", "minus")
        tol = 10.0 * (ds + ds)
        for k in range(table.s_nodes.shape[0]):
            assert abs(table.values[k, 0, 0] - up_block[0, 0]) <= tol
            assert abs(table.values[k, 1, 0] - down_block[0, 0]) <= tol

    def test_level_zero_identity_block(self, symmetric_model):
        table = laplace_passage_table(symmetric_model, 1.0, 0.0, ds=5e-3, da=5e-3,
                                      eta=8.0, s_window=0.5)
        # starting in the hit class at level zero: instant hit, no discount
        np.testing.assert_allclose(table.values[:, 0, 0], 1.0, atol=1e-12)

    def test_monotone_in_discount(self, sinusoidal_model):
        lo = laplace_passage_table(sinusoidal_model, 0.5, 0.5, ds=5e-3, da=5e-3,
                                   eta=8.0, s_window=0.5)
        hi = laplace_passage_table(sinusoidal_model, 2.0, 0.5, ds=5e-3, da=5e-3,
                                   eta=8.0, s_window=0.5)
        assert np.all(lo.values >= hi.values - 1e-9)

    def test_range_and_rowsums(self, three_state_model):
        table = laplace_passage_table(three_state_model, 1.0, 0.5, ds=5e-3, da=5e-3,
                                      eta=8.0, s_window=0.5)
        assert np.all(table.values >= -1e-9)
        assert np.all(table.values.sum(axis=2) <= 1.0 + 1e-9)


class TestCrosscheck:
    def test_symmetric_passes_default(self, symmetric_model):
        rep = homog_crosscheck(symmetric_model, 1.0, 1.0, ds=2e-3, da=2e-3, eta=10.0)
        assert rep.passed
        assert rep.deviation <= rep.tolerance

    def test_minus_side(self, symmetric_model):
        rep = homog_crosscheck(symmetric_model, 1.0, 0.5, sign="minus",
                               ds=2e-3, da=2e-3, eta=10.0)
        assert rep.passed

    def test_trivial_generator_exact(self):
        from fluidhopf import FluidModel, GeneratorFamily, StateSpace

        model = FluidModel(StateSpace(["p", "m"], [1.0, -1.0]),
                           GeneratorFamily.constant(np.zeros((2, 2))))
        rep = homog_crosscheck(model, 1.0, 0.5, ds=5e-3, da=5e-3, eta=6.0,
                               s_probe_max=0.5)
        # characteristics never couple: machine-precision agreement
        assert rep.deviation <= 1e-12

    def test_coarse_grid_degrades_per_error_model(self):
        # a deliberately coarse grid must fall below default-grid quality:
        # its measured deviation exceeds the default tolerance 10(ds0+da0)
        from fluidhopf import FluidModel, GeneratorFamily, StateSpace

        lam = np.array([[-3.0, 2.0, 1.0], [1.0, -2.5, 1.5], [2.0, 2.0, -4.0]])
        model = FluidModel(StateSpace(["a", "b", "c"], [1.0, 2.0, -1.0]),
                           GeneratorFamily.constant(lam))
        coarse = homog_crosscheck(model, 1.0, 1.0, ds=0.1, da=0.1, eta=10.0)
        fine = homog_crosscheck(model, 1.0, 1.0, ds=1e-3, da=1e-3, eta=10.0)
        assert fine.passed
        assert coarse.deviation > 10.0 * (1e-3 + 1e-3)
        assert coarse.deviation > 50.0 * fine.deviation

    def test_time_varying_family_rejected(self, sinusoidal_model):
        with pytest.raises(NotConstantFamily):
            homog_crosscheck(sinusoidal_model, 1.0, 1.0)


class TestInvertLaplace:
    def test_point_mass_cdf(self):
        # transform exp(-c) is a unit mass at tau = 1; CDF at 2 is 1
        t = 2.0
        samples = np.exp(-laplace_inversion_nodes(t))
        assert invert_laplace(samples, t, kind="cdf") == pytest.approx(1.0, abs=0.05)

    def test_exponential_density(self):
        t = 1.0
        samples = 1.0 / (1.0 + laplace_inversion_nodes(t))
        got = invert_laplace(samples, t, kind="density")
        assert got == pytest.approx(math.exp(-1.0), rel=0.05)

    def test_zero_transform(self):
        assert invert_laplace(np.zeros(12), 1.0) == 0.0

    def test_too_few_samples(self):
        with pytest.raises(ValueError):
            invert_laplace(np.ones(5), 1.0)

    def test_oscillation_detected(self):
        rng = np.random.default_rng(3)
        with pytest.raises(IllConditioned):
            invert_laplace(rng.normal(size=12), 1.0)

    def test_smaller_even_order_accepted(self):
        t = 1.0
        samples = 1.0 / (1.0 + laplace_inversion_nodes(t, order=10))
        got = invert_laplace(samples, t, kind="density", order=10)
        assert got == pytest.approx(math.exp(-1.0), rel=0.05)
