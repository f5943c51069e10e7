"""High-level queries: Laplace passage tables and the homogeneous crosscheck.

A Laplace table collects ``E[exp(-c (tau - s)) 1{X(tau) = j}]`` for every
start state and every target ``j`` in the hit class, assembled from one PDE
solve per target with the discounted-indicator boundary payoff.  For a
constant generator the table must reproduce the matrix factorization's
passage matrices; ``homog_crosscheck`` measures that deviation.  A fixed
Gaver-Stehfest rule inverts transforms sampled at real discounts.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import _backend
from .errors import IllConditioned, NotConstantFamily
from .homog import HomogFactorization, factorize, homog_passage_matrix
from .model import FluidModel
from .passage import (
    GridFunction,
    exp_indicator_boundary,
    solve_passage,
    solve_passage_minus,
)


@dataclass(frozen=True)
class LaplaceTable:
    """Normalized discounted passage table on a window of the s-grid."""

    c: float
    level: float
    sign: str
    s_nodes: np.ndarray
    from_labels: tuple[str, ...]
    to_labels: tuple[str, ...]
    values: np.ndarray  # (n_s, m, len(to_labels))

    def at(self, s: float) -> np.ndarray:
        k = int(np.argmin(np.abs(self.s_nodes - s)))
        return self.values[k]


def laplace_passage_table(
    model: FluidModel,
    c: float,
    level: float,
    sign: str = "plus",
    ds: float | None = None,
    da: float | None = None,
    eta: float | None = None,
    s_window: float | None = None,
) -> LaplaceTable:
    """One solve per target state, then divide out the ``exp(-c s)`` factor.

    The resulting entries are the Laplace transforms
    ``E[exp(-c (tau_level - s)) 1{X = j}]`` for every start state (both sign
    classes are read off the same solve) up to the taper bias
    ``exp(-c (eta - 1))``.
    """
    if c <= 0:
        raise ValueError("discount c must be positive")
    if sign not in ("plus", "minus"):
        raise ValueError("sign must be 'plus' or 'minus'")
    space = model.space
    hit_idx = space.plus_indices if sign == "plus" else space.minus_indices
    solver = solve_passage if sign == "plus" else solve_passage_minus
    n_hit = len(hit_idx)

    def solve_target(li: int) -> GridFunction:
        g = exp_indicator_boundary(c, li, n_hit, eta=eta)
        return solver(model, g, level, ds=ds, da=da)

    threads = min(_backend.thread_count(), n_hit)
    if threads <= 1:
        sols = [solve_target(li) for li in range(n_hit)]
    else:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            sols = list(ex.map(solve_target, range(n_hit)))

    s_nodes = sols[0].grid.s_nodes
    if s_window is None:
        s_window = min(4.0 / c, sols[0].grid.eta - 1.0)
    keep = s_nodes <= s_window + 1e-12
    s_kept = s_nodes[keep]
    values = np.zeros((s_kept.shape[0], space.m, n_hit))
    for li, sol in enumerate(sols):
        # zero_col holds E_{s,i}[g(tau, X_tau)] for every start state
        values[:, :, li] = sol.zero_col[keep] * np.exp(c * s_kept)[:, None]
    return LaplaceTable(
        c=float(c), level=float(level), sign=sign, s_nodes=s_kept,
        from_labels=space.labels,
        to_labels=tuple(space.labels[i] for i in hit_idx),
        values=values,
    )


@dataclass(frozen=True)
class CrosscheckReport:
    c: float
    level: float
    sign: str
    deviation: float
    tolerance: float
    passed: bool
    s_probes: np.ndarray


def homog_crosscheck(
    model: FluidModel,
    c: float,
    level: float,
    sign: str = "plus",
    ds: float = 1e-3,
    da: float = 1e-3,
    eta: float | None = None,
    s_probe_max: float = 1.0,
    fact: HomogFactorization | None = None,
) -> CrosscheckReport:
    """Compare the PDE table against the matrix factorization (constant L).

    Passes when the max deviation over the probed s-nodes is below
    ``10 (ds + da)``.
    """
    if not model.generator.is_constant:
        raise NotConstantFamily("homog_crosscheck requires a constant family")
    space = model.space
    if fact is None:
        fact = factorize(model.generator.matrix, space, c)
    hit_side = "plus" if sign == "plus" else "minus"
    other_side = "minus" if sign == "plus" else "plus"
    block_hit = homog_passage_matrix(fact, level, sign, from_side=hit_side)
    block_other = homog_passage_matrix(fact, level, sign, from_side=other_side)

    table = laplace_passage_table(
        model, c, level, sign, ds=ds, da=da, eta=eta, s_window=s_probe_max
    )
    hit_idx = space.plus_indices if sign == "plus" else space.minus_indices
    other_idx = space.minus_indices if sign == "plus" else space.plus_indices
    dev = 0.0
    for k in range(table.s_nodes.shape[0]):
        for a, i in enumerate(hit_idx):
            for b in range(len(hit_idx)):
                dev = max(dev, abs(table.values[k, i, b] - block_hit[a, b]))
        for a, i in enumerate(other_idx):
            for b in range(len(hit_idx)):
                dev = max(dev, abs(table.values[k, i, b] - block_other[a, b]))
    tol = 10.0 * (table_ds(table) + da_of(model, table, da))
    return CrosscheckReport(
        c=float(c), level=float(level), sign=sign, deviation=float(dev),
        tolerance=float(tol), passed=bool(dev <= tol), s_probes=table.s_nodes,
    )


def table_ds(table: LaplaceTable) -> float:
    return float(table.s_nodes[1] - table.s_nodes[0])


def da_of(model: FluidModel, table: LaplaceTable, da_req: float) -> float:
    # the solver snaps da so that the level is a whole number of steps
    if table.level <= 0:
        return da_req
    n_up = max(1, math.ceil(table.level / da_req - 1e-9))
    return table.level / n_up


# -- Laplace inversion ---------------------------------------------------------

def stehfest_weights(order: int) -> np.ndarray:
    """Salzer summation weights for the Gaver-Stehfest rule (even order)."""
    if order % 2 or order < 2:
        raise ValueError("order must be a positive even integer")
    m2 = order // 2
    fac = math.factorial
    V = np.zeros(order)
    for k in range(1, order + 1):
        acc = 0.0
        for j in range((k + 1) // 2, min(k, m2) + 1):
            acc += (
                j ** m2 * fac(2 * j)
                / (fac(m2 - j) * fac(j) * fac(j - 1) * fac(k - j) * fac(2 * j - k))
            )
        V[k - 1] = (-1) ** (k + m2) * acc
    return V


def laplace_inversion_nodes(t: float, order: int = 12) -> np.ndarray:
    """Discount values at which the transform must be sampled for time t."""
    if t <= 0:
        raise ValueError("t must be positive")
    return np.arange(1, order + 1) * math.log(2.0) / t


def invert_laplace(
    samples, t: float, kind: str = "density", order: int = 12
) -> float:
    """Gaver-Stehfest inversion at time ``t`` from real-axis samples.

    ``samples[k]`` must be the transform at ``(k+1) ln2 / t``.  ``kind``
    selects the density (samples used as-is) or the CDF (samples divided by
    the node, i.e. inverting ``F(c)/c``).  Numerically fragile by nature:
    when the order-N and order-(N-2) estimates differ by more than 10 %,
    IllConditioned is raised.
    """
    samples = np.asarray(samples, dtype=float)
    if samples.ndim != 1 or samples.shape[0] < 8:
        raise ValueError("need at least 8 transform samples")
    if kind not in ("density", "cdf"):
        raise ValueError("kind must be 'density' or 'cdf'")
    n_eff = min(order, samples.shape[0])
    n_eff -= n_eff % 2
    nodes = laplace_inversion_nodes(t, n_eff)
    f = samples[:n_eff] / nodes if kind == "cdf" else samples[:n_eff].copy()

    def gs(n: int) -> float:
        w = stehfest_weights(n)
        return math.log(2.0) / t * float(np.dot(w, f[:n]))

    val = gs(n_eff)
    val_lo = gs(n_eff - 2)
    diff = abs(val - val_lo)
    scale = max(abs(val), abs(val_lo))
    if scale > 0.0 and diff > 0.10 * scale:
        raise IllConditioned(
            f"successive-order estimates differ by {diff / scale:.1%} "
            f"({val_lo:.6g} vs {val:.6g})"
        )
    return val
