"""Verification suites tying the three computation routes together.

Four suites: ``homog`` (matrix factorization properties and the closed-form
two-state case), ``inhomog`` (time-homogeneous reduction of the PDE route,
Monte Carlo vs PDE on a sinusoidal family, and the absorbing-chain passage
law), ``jumps`` (exactness of the holding-time sampler), ``identities``
(semigroup, composition, generator, and support properties of the PDE
operators).  Each check records a measured value against a pinned tolerance;
a suite passes when every check does.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.stats

from . import mc
from .homog import factorize
from .model import FluidModel, GeneratorFamily, StateSpace
from .passage import (
    apply_G,
    check_identity_whd,
    exp_indicator_boundary,
    extract_J,
    extract_P,
    extract_start_passage,
    solve_passage,
)
from .queries import homog_crosscheck

KS_CRIT_1PCT = 1.62762  # asymptotic one-sample KS critical factor at 1%


@dataclass(frozen=True)
class Check:
    label: str
    value: float
    tolerance: float
    passed: bool
    detail: str = ""


@dataclass
class SuiteReport:
    name: str
    checks: list[Check] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def add(self, label: str, value: float, tolerance: float, detail: str = "",
            larger_ok: bool = False) -> None:
        ok = value >= tolerance if larger_ok else value <= tolerance
        self.checks.append(Check(label, float(value), float(tolerance), bool(ok), detail))

    def lines(self) -> list[str]:
        out = []
        for c in self.checks:
            status = "PASS" if c.passed else "FAIL"
            out.append(
                f"[{status}] {self.name}/{c.label}: value={c.value:.6g} "
                f"tol={c.tolerance:.6g} {c.detail}"
            )
        out.append(f"[{'PASS' if self.passed else 'FAIL'}] suite {self.name}")
        return out


# -- reference models ----------------------------------------------------------

def two_state_symmetric(alpha: float = 1.0, beta: float = 1.0) -> FluidModel:
    """Two states, rates (+1, -1), constant switch rates alpha/beta."""
    space = StateSpace(["up", "down"], [1.0, -1.0])
    fam = GeneratorFamily.constant([[-alpha, alpha], [beta, -beta]])
    return FluidModel(space, fam)


def absorbing_chain() -> FluidModel:
    """Up state decays at rate one into an absorbing down state."""
    space = StateSpace(["up", "down"], [1.0, -1.0])
    fam = GeneratorFamily.constant([[-1.0, 1.0], [0.0, 0.0]])
    return FluidModel(space, fam)


def sinusoidal_model(amplitude: float = 0.5, bound_K: float = 1.5) -> FluidModel:
    """``L(s) = (1 + amplitude sin s) [[-1, 1], [1, -1]]``."""
    space = StateSpace(["up", "down"], [1.0, -1.0])
    base = np.array([[-1.0, 1.0], [1.0, -1.0]])
    fam = GeneratorFamily.fourier_polynomial(
        base, fourier_terms=[(amplitude * base, 1.0, 0.0)], bound_K=bound_K
    )
    return FluidModel(space, fam)


def scalar_crossing_oracle(alpha: float, beta: float, c: float) -> tuple[float, float]:
    """Quadratic-formula solution of the scalar up-crossing problem.

    For one up and one down state the crossing probability pi solves
    ``alpha pi^2 - (alpha + beta + 2 c) pi + beta = 0`` (smaller root) and the
    climb exponent is ``q = -(alpha + c) + beta pi`` divided by the up rate.
    Rates here are (+1, -1).
    """
    b = alpha + beta + 2.0 * c
    pi = (b - math.sqrt(b * b - 4.0 * alpha * beta)) / (2.0 * alpha)
    q = -(alpha + c) + alpha * pi
    return pi, q


def random_generator(rng: np.random.Generator, m: int) -> np.ndarray:
    """Random valid generator with off-diagonal entries in [0, 5]."""
    lam = rng.uniform(0.0, 5.0, size=(m, m))
    mask = rng.random((m, m)) < 0.75
    lam = lam * mask
    np.fill_diagonal(lam, 0.0)
    # keep every state leaky so the chain cannot freeze structurally
    for i in range(m):
        if lam[i].sum() == 0.0:
            j = (i + 1) % m
            lam[i, j] = rng.uniform(0.5, 5.0)
    np.fill_diagonal(lam, -lam.sum(axis=1))
    return lam


def random_space(rng: np.random.Generator, m: int) -> StateSpace:
    v = rng.uniform(0.2, 3.0, size=m)
    signs = np.where(rng.random(m) < 0.5, 1.0, -1.0)
    signs[0] = 1.0
    signs[1] = -1.0
    return StateSpace([f"s{k}" for k in range(m)], v * signs)


# -- suites --------------------------------------------------------------------

def suite_homog(n_random: int = 200, seed: int = 20260301) -> SuiteReport:
    rep = SuiteReport("homog")
    rng = np.random.Generator(np.random.Philox(key=np.array([seed, 0], dtype=np.uint64)))
    cs = [0.1, 1.0, 10.0]
    worst_residual = 0.0
    worst_pi = 0.0       # most negative entry / largest overshoot above 1
    worst_pi_row = -1.0  # largest Pi row sum (must stay < 1)
    worst_q_off = 0.0    # most negative off-diagonal of Q
    worst_q_row = 0.0    # largest Q row sum (must stay <= 0)
    failures = 0
    for k in range(n_random):
        m = int(rng.integers(2, 9))
        space = random_space(rng, m)
        lam = random_generator(rng, m)
        c = cs[k % len(cs)]
        try:
            fact = factorize(lam, space, c)
        except Exception:
            failures += 1
            continue
        worst_residual = max(worst_residual, fact.residual)
        for Pi in (fact.Pi_plus, fact.Pi_minus):
            if Pi.size:
                worst_pi = max(worst_pi, float(np.max(-Pi)), float(np.max(Pi - 1.0)))
                worst_pi_row = max(worst_pi_row, float(np.max(Pi.sum(axis=1))))
        for Q in (fact.Q_plus, fact.Q_minus):
            off = Q - np.diag(np.diag(Q))
            if off.size:
                worst_q_off = max(worst_q_off, float(np.max(-off)))
            worst_q_row = max(worst_q_row, float(np.max(Q.sum(axis=1))))
    rep.add("random_battery_failures", failures, 0.0, f"of {n_random} cases")
    rep.add("random_battery_residual", worst_residual, 1e-10)
    rep.add("pi_entry_range", worst_pi, 1e-12, "entries within [0,1] up to fp dust")
    rep.add("pi_row_sums_below_one", worst_pi_row, 1.0 - 1e-15, "strictly substochastic")
    rep.add("q_offdiag_nonneg", worst_q_off, 1e-12)
    rep.add("q_row_sums_nonpos", worst_q_row, 1e-12)

    model = two_state_symmetric()
    fact = factorize(model.generator.matrix, model.space, 1.0)
    pi_ref, q_ref = scalar_crossing_oracle(1.0, 1.0, 1.0)
    rep.add("closed_form_pi", abs(float(fact.Pi_plus[0, 0]) - pi_ref), 1e-12,
            f"reference {pi_ref:.15f}")
    rep.add("closed_form_q", abs(float(fact.Q_plus[0, 0]) - q_ref), 1e-12,
            f"reference {q_ref:.15f}")
    return rep


def suite_inhomog(
    n_mc: int = 200_000,
    seed: int = 20260302,
    reduction_ds: float = 1e-3,
    mc_pde_ds: float = 4e-4,
) -> SuiteReport:
    rep = SuiteReport("inhomog")

    # time-homogeneous reduction at the default grid, then halved
    model = two_state_symmetric()
    eta = 12.0
    base = homog_crosscheck(model, c=1.0, level=1.0, ds=reduction_ds,
                            da=reduction_ds, eta=eta)
    rep.add("reduction_deviation", base.deviation, base.tolerance)
    half = homog_crosscheck(model, c=1.0, level=1.0, ds=reduction_ds / 2,
                            da=reduction_ds / 2, eta=eta)
    ratio = base.deviation / max(half.deviation, 1e-300)
    rep.add("reduction_halving_ratio", ratio, 1.8, larger_ok=True)

    # sinusoidal family: PDE vs MC with a shared truncated payoff
    sin_model = sinusoidal_model()
    c = 1.0
    eta_sin = 12.0
    for level in (0.5, 1.0):
        g = exp_indicator_boundary(c, 0, 1, eta=eta_sin)
        sol = solve_passage(sin_model, g, level, ds=mc_pde_ds, da=mc_pde_ds)
        pde_up = float(sol.zero_col[0, 0])
        pde_down = float(sol.zero_col[0, 1])
        for start, pde_val in (("up", pde_up), ("down", pde_down)):
            est = mc.estimate_expectation(
                sin_model, _discounted_taper_payoff(c, eta_sin, sin_model, 0),
                s0=0.0, i0=start, level=level, sign="plus", n=n_mc,
                seed=seed + int(level * 10), discount=c,
            )
            tol = 3.0 * est.stderr + est.bias_bound
            rep.add(
                f"mc_vs_pde_l{level:g}_{start}", abs(pde_val - est.mean), tol,
                f"pde={pde_val:.6f} mc={est.mean:.6f} se={est.stderr:.2e}",
            )

    # absorbing chain: fraction of finite up-passages is exp(-level)
    chain = absorbing_chain()
    for level in (0.5, 1.0, 2.0):
        est = mc.estimate_expectation(
            chain, lambda tau, state: np.ones_like(tau), s0=0.0, i0="up",
            level=level, sign="plus", n=n_mc, seed=seed + int(level * 100),
        )
        ref = math.exp(-level)
        se = math.sqrt(ref * (1.0 - ref) / n_mc)
        rep.add(
            f"absorbing_finite_fraction_l{level:g}", abs(est.mean - ref),
            3.0 * se, f"mc={est.mean:.6f} ref={ref:.6f}",
        )
    return rep


def _taper(s, eta):
    from .passage import smooth_cutoff
    return smooth_cutoff(s, eta)


def _discounted_taper_payoff(c: float, eta: float, model: FluidModel, target: int):
    """Payoff exp(-c tau) 1{X_tau = target-th up state}, tapered at eta."""
    target_state = int(model.space.plus_indices[target])

    def g(tau, state):
        return np.exp(-c * tau) * _taper(tau, eta) * (state == target_state)

    return g


def suite_jumps(n: int = 100_000, seed: int = 20260303) -> SuiteReport:
    rep = SuiteReport("jumps")
    crit = KS_CRIT_1PCT / math.sqrt(n)

    # constant rate one: holding times are Exp(1)
    chain = absorbing_chain()
    g1 = mc.jump_times_sample(chain, 0.0, "up", n, seed, n_jumps=1, horizon=60.0)[:, 0]
    finite = g1[np.isfinite(g1)]
    stat = scipy.stats.kstest(finite, scipy.stats.expon.cdf).statistic
    rep.add("ks_constant_rate", float(stat), crit, f"n={finite.size}")

    # sinusoidal rate 1 + 0.5 sin u from s0 = 0
    sin_model = sinusoidal_model()
    g12 = mc.jump_times_sample(sin_model, 0.0, "up", n, seed + 1, n_jumps=2,
                               horizon=80.0)
    g1s = g12[:, 0]
    cdf = lambda r: 1.0 - np.exp(-(r + 0.5 * (1.0 - np.cos(r))))
    stat = scipy.stats.kstest(g1s[np.isfinite(g1s)], cdf).statistic
    rep.add("ks_sinusoidal_rate", float(stat), crit)

    # second jump time bound P(gamma2 <= r) <= K^2 r^2
    K = sin_model.bound_K
    g2 = g12[:, 1]
    for r in (0.01, 0.05, 0.1):
        p_hat = float(np.mean(g2 <= r))
        se = math.sqrt(max(p_hat * (1.0 - p_hat), 1.0 / n) / n)
        rep.add(f"second_jump_bound_r{r:g}", p_hat, K * K * r * r + 3.0 * se,
                f"empirical={p_hat:.2e}")

    # thinning sampler agrees with hazard inversion (two-sample KS)
    n2 = 20_000
    a = mc.jump_times_sample(sin_model, 0.0, "up", n2, seed + 2, n_jumps=1,
                             horizon=80.0)[:, 0]
    b = mc.thinning_first_holding(sin_model, 0.0, "up", n2, seed + 3, horizon=80.0)
    stat = scipy.stats.ks_2samp(a[np.isfinite(a)], b[np.isfinite(b)]).statistic
    crit2 = KS_CRIT_1PCT * math.sqrt(2.0 / n2)
    rep.add("ks_thinning_crosscheck", float(stat), crit2)
    return rep


def suite_identities(seed: int = 20260304) -> SuiteReport:
    rep = SuiteReport("identities")
    model = sinusoidal_model()
    c = 1.0

    # semigroup: P_{l+h} g = P_l P_h g within twice the one-solve error model;
    # da not divisible by v ds so the feet land between nodes and the law is
    # not an exact grid identity
    eta = 8.0
    ds, da = 1e-3, 1.6e-3
    ell, h = 0.5, 0.5
    g = exp_indicator_boundary(c, 0, 1, eta=eta)
    gsup = g.sup_norm()
    tol1 = 5.0 * (ds + da) * gsup
    direct = extract_P(solve_passage(model, g, ell + h, ds=ds, da=da))
    inner = extract_P(solve_passage(model, g, h, ds=ds, da=da))
    chained = extract_P(
        solve_passage(model, inner.to_boundary(eta=eta), ell, ds=ds, da=da)
    )
    dev = float(np.max(np.abs(direct.values - chained.values)))
    rep.add("semigroup", dev, 2.0 * tol1)

    # composition: down-start level values equal J applied to P_l g
    sol = solve_passage(model, g, 1.0, ds=ds, da=da)
    down_start = extract_start_passage(sol)
    p_tab = extract_P(sol)
    j_of_p = extract_J(
        solve_passage(model, p_tab.to_boundary(eta=eta), 0.0, ds=ds, da=da)
    )
    dev = float(np.max(np.abs(down_start.values - j_of_p.values)))
    rep.add("composition", dev, 2.0 * tol1)

    # generator: difference quotient of P_h g against the closed formula
    eta_g = 4.0
    ds_g = da_g = 2e-4
    gq = exp_indicator_boundary(c, 0, 1, eta=eta_g)
    sup_q = gq.sup_norm()
    j_tab = extract_J(solve_passage(model, gq, 0.0, ds=ds_g, da=da_g))
    g_tab = apply_G(model, gq, j_tab)
    errs = {}
    for h_q in (1e-2, 1e-3):
        p_h = extract_P(solve_passage(model, gq, h_q, ds=ds_g, da=da_g))
        s_nodes = p_h.s_nodes
        gvals = np.stack([gq(s_nodes, li) for li in range(1)], axis=1)
        quotient = (p_h.values - gvals) / h_q
        errs[h_q] = float(np.max(np.abs(quotient - g_tab.values)))
        rep.add(
            f"generator_quotient_h{h_q:g}", errs[h_q],
            20.0 * sup_q * h_q + 20.0 * sup_q * (ds_g + da_g),
        )
    rep.add("generator_quotient_decreasing", errs[1e-2] - errs[1e-3], 0.0,
            larger_ok=True, detail=f"{errs[1e-2]:.2e} -> {errs[1e-3]:.2e}")

    # derivative identity residual: magnitude and first-order convergence
    homog = two_state_symmetric()
    eta_w = 8.0
    gw = exp_indicator_boundary(c, 0, 1, eta=eta_w)
    sup_w = gw.sup_norm()
    devs = {}
    for dsw in (2e-3, 1e-3):
        solw = solve_passage(homog, gw, 0.0, ds=dsw, da=dsw)
        jw = extract_J(solw)
        gw_tab = apply_G(homog, gw, jw)
        devs[dsw], _ = check_identity_whd(homog, gw, jw, gw_tab, ds=dsw, da=dsw)
    rep.add("whd_residual", devs[1e-3], 5.0 * (1e-3 + 1e-3) * sup_w)
    rep.add("whd_halving_ratio", devs[2e-3] / max(devs[1e-3], 1e-300), 1.8,
            larger_ok=True)

    # sinusoidal family as well: first-order convergence of the residual
    devs_sin = {}
    for dsw in (2e-3, 1e-3):
        solw = solve_passage(model, gw, 0.0, ds=dsw, da=dsw)
        jw = extract_J(solw)
        gw_tab = apply_G(model, gw, jw)
        devs_sin[dsw], _ = check_identity_whd(model, gw, jw, gw_tab, ds=dsw, da=dsw)
    rep.add("whd_halving_ratio_sinusoidal",
            devs_sin[2e-3] / max(devs_sin[1e-3], 1e-300), 1.8, larger_ok=True)

    # support preservation: exact zeros past the support bound
    eta_s = 4.0
    gs = exp_indicator_boundary(c, 0, 1, eta=eta_s)
    sol = solve_passage(model, gs, 0.5, ds=1e-3, da=1e-3, s_max=6.0)
    j_tab = extract_J(sol)
    p_tab = extract_P(sol)
    beyond = j_tab.s_nodes >= eta_s
    worst = max(
        float(np.max(np.abs(j_tab.values[beyond]))),
        float(np.max(np.abs(p_tab.values[beyond]))),
    )
    rep.add("support_preservation", worst, 0.0, "exact zeros required")
    return rep


SUITES = {
    "homog": suite_homog,
    "inhomog": suite_inhomog,
    "jumps": suite_jumps,
    "identities": suite_identities,
}


def run_suite(name: str, **kwargs) -> SuiteReport:
    if name not in SUITES:
        raise KeyError(f"unknown suite {name!r}; choose from {sorted(SUITES)}")
    return SUITES[name](**kwargs)
