"""Monte Carlo oracle: exactness of the samplers and estimator plumbing."""

import math

import numpy as np
import pytest
import scipy.stats

from fluidhopf import HazardError, estimate_expectation, passage_functional, sample_path
from fluidhopf.mc import (
    default_horizon,
    empirical_marginal,
    jump_times_sample,
    replica_rng,
    thinning_first_holding,
)

KS_CRIT_1PCT = 1.62762


class TestSamplePath:
    def test_states_change_at_every_jump(self, sinusoidal_model):
        rng = replica_rng(1, 0)
        path = sample_path(sinusoidal_model, 0.0, "up", 30.0, rng)
        assert np.all(np.diff(path.states) != 0)
        assert np.all(np.diff(path.jump_times) > 0)

    def test_phi_slopes_match_rates(self, sinusoidal_model):
        rng = replica_rng(2, 5)
        path = sample_path(sinusoidal_model, 0.0, "up", 20.0, rng)
        times = path.breakpoint_times
        v = sinusoidal_model.space.v
        for k in range(len(times) - 1):
            dt = times[k + 1] - times[k]
            dphi = path.phi_breakpoints[k + 1] - path.phi_breakpoints[k]
            assert dphi == pytest.approx(v[path.states[k]] * dt, rel=1e-12)

    def test_absorbing_state_holds_forever(self, absorbing_model):
        rng = replica_rng(3, 1)
        path = sample_path(absorbing_model, 0.0, "down", 25.0, rng)
        assert path.jump_times.size == 0
        assert path.phi_breakpoints[-1] == pytest.approx(-25.0)

    def test_hazard_error_on_invalid_generator(self):
        # positive diagonal entry: a structurally invalid family
        from fluidhopf import FluidModel, GeneratorFamily, StateSpace

        fam = GeneratorFamily(kind="constant", m=2, bound_K=1.0,
                              matrix=np.array([[1.0, -1.0], [0.0, 0.0]]))
        model = FluidModel(StateSpace(["p", "m"], [1.0, -1.0]), fam)
        with pytest.raises(HazardError):
            sample_path(model, 0.0, 0, 5.0, replica_rng(0, 0))


class TestHoldingTimeLaws:
    def test_constant_rate_exponential(self, absorbing_model):
        n = 20_000
        g1 = jump_times_sample(absorbing_model, 0.0, "up", n, seed=11,
                               n_jumps=1, horizon=60.0)[:, 0]
        stat = scipy.stats.kstest(g1[np.isfinite(g1)], scipy.stats.expon.cdf).statistic
        assert stat < KS_CRIT_1PCT / math.sqrt(n)

    def test_sinusoidal_rate_closed_form(self, sinusoidal_model):
        # hazard 1 + 0.5 sin u integrates to r + 0.5 (1 - cos r)
        n = 20_000
        g1 = jump_times_sample(sinusoidal_model, 0.0, "up", n, seed=12,
                               n_jumps=1, horizon=60.0)[:, 0]
        cdf = lambda r: 1.0 - np.exp(-(r + 0.5 * (1.0 - np.cos(r))))
        stat = scipy.stats.kstest(g1[np.isfinite(g1)], cdf).statistic
        assert stat < KS_CRIT_1PCT / math.sqrt(n)

    def test_nonzero_start_time_shifts_hazard(self, sinusoidal_model):
        # from s0 the integrated hazard is r + 0.5 (cos s0 - cos(s0 + r))
        n = 20_000
        s0 = 2.0
        g1 = jump_times_sample(sinusoidal_model, s0, "up", n, seed=13,
                               n_jumps=1, horizon=60.0)[:, 0]
        cdf = lambda r: 1.0 - np.exp(-(r + 0.5 * (np.cos(s0) - np.cos(s0 + r))))
        stat = scipy.stats.kstest(g1[np.isfinite(g1)], cdf).statistic
        assert stat < KS_CRIT_1PCT / math.sqrt(n)

    def test_second_jump_quadratic_bound(self, sinusoidal_model):
        n = 20_000
        g12 = jump_times_sample(sinusoidal_model, 0.0, "up", n, seed=14,
                                n_jumps=2, horizon=60.0)
        K = sinusoidal_model.bound_K
        for r in (0.01, 0.05, 0.1):
            p_hat = float(np.mean(g12[:, 1] <= r))
            se = math.sqrt(max(p_hat * (1 - p_hat), 1.0 / n) / n)
            assert p_hat <= K * K * r * r + 3.0 * se

    def test_thinning_agrees_with_inversion(self, sinusoidal_model):
        n = 10_000
        a = jump_times_sample(sinusoidal_model, 0.0, "up", n, seed=15,
                              n_jumps=1, horizon=60.0)[:, 0]
        b = thinning_first_holding(sinusoidal_model, 0.0, "up", n, seed=16,
                                   horizon=60.0)
        stat = scipy.stats.ks_2samp(a[np.isfinite(a)], b[np.isfinite(b)]).statistic
        assert stat < KS_CRIT_1PCT * math.sqrt(2.0 / n)


class TestPassageFunctional:
    def test_deterministic_drift(self, sinusoidal_model):
        rng = replica_rng(4, 2)
        path = sample_path(sinusoidal_model, 1.0, "up", 40.0, rng)
        first_jump = path.jump_times[0]
        level = 0.5 * (first_jump - 1.0)  # reached mid-way into the first leg
        ps = passage_functional(path, level, "plus")
        assert not ps.censored
        assert ps.hit_state == 0
        assert ps.tau == pytest.approx(1.0 + level, rel=1e-12)

    def test_censoring(self, absorbing_model):
        # jumping before the level is reached censors the up-passage
        for r in range(200):
            path = sample_path(absorbing_model, 0.0, "up", 50.0, replica_rng(5, r))
            ps = passage_functional(path, 3.0, "plus")
            if path.jump_times.size and path.jump_times[0] < 3.0:
                assert ps.censored
            else:
                assert not ps.censored and ps.tau == pytest.approx(3.0)

    def test_hit_state_law(self, three_state_model):
        # every finite up-passage lands in the up class, no exceptions
        plus = set(three_state_model.space.plus_indices.tolist())
        for r in range(500):
            path = sample_path(three_state_model, 0.0, "c", 30.0, replica_rng(6, r))
            ps = passage_functional(path, 0.8, "plus")
            if not ps.censored:
                assert ps.hit_state in plus

    def test_minus_mirror(self, symmetric_model):
        for r in range(100):
            path = sample_path(symmetric_model, 0.0, "down", 30.0, replica_rng(7, r))
            ps = passage_functional(path, 0.6, "minus")
            if not ps.censored:
                assert ps.hit_state == 1
                assert path.phi(ps.tau) == pytest.approx(-0.6, abs=1e-9)


class TestEstimator:
    def test_reproducible_bitwise(self, sinusoidal_model):
        kw = dict(s0=0.0, i0="up", level=0.5, sign="plus", n=2000, seed=77)
        g = lambda tau, st: np.exp(-tau)
        a = estimate_expectation(sinusoidal_model, g, **kw)
        b = estimate_expectation(sinusoidal_model, g, **kw)
        assert a == b

    def test_thread_count_invariance(self, sinusoidal_model, monkeypatch):
        g = lambda tau, st: np.exp(-tau)
        kw = dict(s0=0.0, i0="up", level=0.5, sign="plus", n=1500, seed=78)
        monkeypatch.setenv("FLUIDHOPF_THREADS", "1")
        a = estimate_expectation(sinusoidal_model, g, **kw)
        monkeypatch.setenv("FLUIDHOPF_THREADS", "3")
        b = estimate_expectation(sinusoidal_model, g, **kw)
        assert a == b

    def test_zero_payoff(self, symmetric_model):
        est = estimate_expectation(
            symmetric_model, lambda tau, st: np.zeros_like(tau),
            0.0, "up", 0.5, "plus", n=500, seed=1,
        )
        assert est.mean == 0.0 and est.stderr == 0.0

    def test_absorbing_finite_fraction(self, absorbing_model):
        n = 20_000
        est = estimate_expectation(
            absorbing_model, lambda tau, st: np.ones_like(tau),
            0.0, "up", 1.0, "plus", n=n, seed=5,
        )
        ref = math.exp(-1.0)
        assert abs(est.mean - ref) <= 3.0 * est.stderr
        assert est.censor_fraction == pytest.approx(1.0 - est.mean)

    def test_symmetric_crossing_transform(self, symmetric_model):
        # from the down state at level 0: E exp(-c tau) = pi = 2 - sqrt(3)
        n = 20_000
        est = estimate_expectation(
            symmetric_model, lambda tau, st: np.exp(-tau),
            0.0, "down", 0.0, "plus", n=n, seed=6, discount=1.0,
        )
        assert abs(est.mean - (2.0 - math.sqrt(3.0))) <= 3.0 * est.stderr + est.bias_bound

    def test_default_horizon_formula(self, symmetric_model):
        assert default_horizon(symmetric_model, 2.0, 3.0) == pytest.approx(62.0)
        assert default_horizon(symmetric_model, 0.0, 0.1) == pytest.approx(20.0)

    def test_bias_bound(self, symmetric_model):
        est = estimate_expectation(
            symmetric_model, lambda tau, st: np.exp(-tau),
            0.0, "up", 0.5, "plus", n=100, seed=2, horizon=10.0, discount=1.0,
        )
        assert est.bias_bound == pytest.approx(math.exp(-10.0))


class TestMarginals:
    def test_two_state_marginal(self, symmetric_model):
        t = 1.0
        from fluidhopf import evolution_matrix

        ev = evolution_matrix(symmetric_model, 0.0, t, step=1e-3)
        p, se = empirical_marginal(symmetric_model, 0.0, "up", t, n=20_000, seed=8)
        assert np.all(np.abs(p - ev.P[0]) <= 4.0 * se)
